"""List the local maxima of the column and worst-case sweeps of a case-study run.

    python3 scripts/sweep_peaks.py RUN_DIR [CHANNEL]
"""

import csv
import sys
from pathlib import Path

import numpy as np


def read_sweep(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["omega"]) for r in rows]), np.array([float(r["value"]) for r in rows])


def peaks(values):
    return np.flatnonzero((values[1:-1] > values[:-2]) & (values[1:-1] >= values[2:])) + 1


def main(run_dir, channel=0):
    ev = Path(run_dir) / "evaluation"
    for kind in (f"column{channel}", "worst_case"):
        print(f"{kind}:")
        for path in sorted(ev.glob(f"{kind}_*.csv")):
            om, v = read_sweep(path)
            pk = peaks(v)
            listing = ", ".join(f"{om[i]:.3g} rad/s: {v[i]:.4g}" for i in pk)
            print(f"  {path.stem[len(kind) + 1:]:<8} {listing}")


if __name__ == "__main__":
    main(sys.argv[1], int(sys.argv[2]) if len(sys.argv) > 2 else 0)
