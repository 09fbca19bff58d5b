"""Iterations to unit stepsize over the default size x N x seed grid."""

import argparse
import os
import sys

from distls.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default="results/grid.csv")
    ap.add_argument("--use-simulator", action="store_true")
    a = ap.parse_args()
    argv = ["reproduce-fig2", "--seeds", str(a.seeds), "--jobs", str(a.jobs), "--out", a.out]
    if a.use_simulator:
        argv.append("--use-simulator")
    sys.exit(main(argv))
