"""Throughput lower bound and simulated throughput versus EbNo, printed as a table."""

import argparse
import csv
import sys
from pathlib import Path

from hwdshape.cli import ExperimentSpec, execute, parse_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ebno", default="0:5:50")
    ap.add_argument("--trials", type=int, default=200_000)
    ap.add_argument("--bounds-only", action="store_true")
    ap.add_argument("--out", default="results/throughput")
    a = ap.parse_args()
    spec = ExperimentSpec(ebno=parse_grid(a.ebno), trials=a.trials, output=a.out).validate()
    code = execute(spec, simulate=not a.bounds_only)
    rows = list(csv.DictReader(open(Path(a.out) / "sweep.csv")))
    table = {}
    for r in rows:
        table.setdefault(float(r["axis_value"]), {})[r["scheme"]] = r
    schemes = ["ns", "gs", "ps", "hs"]
    print("EbNo  " + "  ".join(f"{s:>13}" for s in schemes) + "   (T_LB / simulated)")
    for v, point in table.items():
        cells = [f"{float(point[s]['throughput_bound']):6.3f}/{float(point[s]['throughput_sim']):6.3f}"
                 for s in schemes]
        print(f"{v:4.0f}  " + "  ".join(cells))
    return code


if __name__ == "__main__":
    sys.exit(main())
