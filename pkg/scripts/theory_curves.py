"""Tabulate the large-window factors F1, F2 and their small-coupling series.

    python3 scripts/theory_curves.py --kappa 0.3 0.6 0.9 --out out/theory
"""
import argparse
from pathlib import Path

import numpy as np

from ptrank import theory
from ptrank.stats import write_csv


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--kappa", type=float, nargs="+", default=[0.3, 0.6, 0.9])
    p.add_argument("--xmax", type=float, default=10.0)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--out", type=Path, default=Path("out/theory"))
    args = p.parse_args()

    x = np.linspace(0.0, args.xmax, args.points)
    args.out.mkdir(parents=True, exist_ok=True)
    for kappa in args.kappa:
        cols = [theory.fullwindow_factor(x, kappa, 1), theory.fullwindow_factor_series(x, kappa, 1),
                theory.fullwindow_factor(x, kappa, 2), theory.fullwindow_factor_series(x, kappa, 2)]
        path = args.out / f"fullwindow_kappa{kappa:g}.csv"
        write_csv(path, ("x", "F1", "F1_series", "F2", "F2_series"), zip(x, *cols))
        gap = [float(np.max(np.abs(cols[i] - cols[i + 1]))) for i in (0, 2)]
        print(f"kappa={kappa:g}: max |F - series| beta=1 {gap[0]:.4f}, beta=2 {gap[1]:.4f} -> {path}")


if __name__ == "__main__":
    main()
