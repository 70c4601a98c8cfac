"""Print a coarse text rendering of a reconstruction slice CSV.

Usage: python scripts/plot_slice.py results/reconstruct/reconstruct_slice_P16.csv [column]
"""

import csv
import sys

import numpy as np


def load(path, column):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    x1 = sorted({float(r["x1"]) for r in rows})
    x2 = sorted({float(r["x2"]) for r in rows})
    grid = np.zeros((len(x1), len(x2)))
    for r in rows:
        grid[x1.index(float(r["x1"])), x2.index(float(r["x2"]))] = float(r[column])
    return grid


def main():
    path = sys.argv[1]
    column = sys.argv[2] if len(sys.argv) > 2 else "reconstruction"
    g = load(path, column)
    shades = " .:-=+*#%@"
    lo, hi = g.min(), g.max()
    idx = np.clip(((g - lo) / max(hi - lo, 1e-300) * (len(shades) - 1)).round().astype(int), 0, len(shades) - 1)
    for row in idx:
        print("".join(shades[i] * 2 for i in row))
    print(f"{column}: min {lo:.4g}, max {hi:.4g}")


if __name__ == "__main__":
    main()
