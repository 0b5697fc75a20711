"""BER versus EbNo for NS/GS (8-QAM) and PS/HS (32-QAM) at kappa = 0.13 over AWGN."""

import argparse
import sys

from hwdshape.cli import ExperimentSpec, execute, parse_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ebno", default="0:5:50")
    ap.add_argument("--kappa", type=float, default=0.13)
    ap.add_argument("--trials", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/ebno_sweep")
    a = ap.parse_args()
    spec = ExperimentSpec(ebno=parse_grid(a.ebno), kappa=[a.kappa], trials=a.trials, seed=a.seed,
                          workers=a.workers, output=a.out).validate()
    code = execute(spec)
    print(f"wrote {a.out}/sweep.csv")
    return code


if __name__ == "__main__":
    sys.exit(main())
