"""BER versus total distortion level kappa at a fixed EbNo, all four schemes."""

import argparse
import sys

from hwdshape.cli import ExperimentSpec, execute, parse_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kappa", default="0.02:0.02:0.3")
    ap.add_argument("--ebno", type=float, default=20.0)
    ap.add_argument("--trials", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bounds-only", action="store_true")
    ap.add_argument("--out", default="results/kappa_sweep")
    a = ap.parse_args()
    spec = ExperimentSpec(ebno=[a.ebno], kappa=parse_grid(a.kappa), trials=a.trials, seed=a.seed,
                          output=a.out).validate()
    return execute(spec, simulate=not a.bounds_only)


if __name__ == "__main__":
    sys.exit(main())
