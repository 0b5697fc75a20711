"""BER averaged over Rayleigh block fading, with or without per-realization redesign."""

import argparse
import sys

from hwdshape.cli import ExperimentSpec, execute, parse_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ebno", default="0:10:40")
    ap.add_argument("--scheme", default="ns,ps", help="hs/gs redesign per fade is slow")
    ap.add_argument("--lam", type=float, default=1.0, help="mean channel power")
    ap.add_argument("--trials", type=int, default=200 * 2048)
    ap.add_argument("--block-size", type=int, default=2048, help="symbols per channel realization")
    ap.add_argument("--fixed-design", action="store_true", help="design once on the mean channel")
    ap.add_argument("--out", default="results/rayleigh")
    a = ap.parse_args()
    spec = ExperimentSpec(scheme=a.scheme, channel="rayleigh", rayleigh_lambda=a.lam,
                          ebno=parse_grid(a.ebno), trials=a.trials, block_size=a.block_size,
                          output=a.out).validate()
    if a.fixed_design:
        spec.redesign = False
    return execute(spec)


if __name__ == "__main__":
    sys.exit(main())
