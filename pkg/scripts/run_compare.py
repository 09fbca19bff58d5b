"""Centralized vs distributed line search on one 25-node, 100-edge instance.

Writes centralized.csv, distributed.csv and summary.json to the output directory.
"""

import argparse
import sys

from distls.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--N", type=int, default=1)
    ap.add_argument("--out", default="results/compare")
    a = ap.parse_args()
    sys.exit(main(["compare", "--nodes", "25", "--edges", "100", "--seed", str(a.seed),
                   "--N", str(a.N), "--out", a.out]))
