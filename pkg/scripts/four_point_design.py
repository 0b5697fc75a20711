"""PS design of 8-QAM at a 2-bit rate floor: print priors, support and bound."""

import argparse

import numpy as np

from hwdshape.analysis import Link
from hwdshape.constellation import entropy, make_constellation
from hwdshape.design import PSProblem, design_ps
from hwdshape.noise import ChannelState, DistortionProfile
from hwdshape.simulator import ebno_to_alpha


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ebno", type=float, default=20.0)
    ap.add_argument("--layout", default="pinwheel", choices=("pinwheel", "rectangular"))
    a = ap.parse_args()
    c = make_constellation("QAM", 8, layout=a.layout)
    link = Link.from_profile(DistortionProfile(), ChannelState(1.0, ebno_to_alpha(a.ebno, 2.0)))
    r = design_ps(PSProblem(c, 2.0), link)
    print(f"{'idx':>3} {'re':>8} {'im':>8} {'label':>5} {'prior':>8}")
    for m in range(c.M):
        x = c.symbols[m]
        print(f"{m:3d} {x.real:8.4f} {x.imag:8.4f} {c.label_strings[m]:>5} {r.priors[m]:8.5f}")
    print(f"support={np.flatnonzero(r.priors > 1e-3).tolist()} entropy={entropy(r.priors):.6f} "
          f"bound={r.bound_value:.4e} iterations={r.iterations}")


if __name__ == "__main__":
    main()
