"""Manufactured-solution errors for x^(2n) + x'' + x^3 = f over orders and
trial degrees."""

import argparse
import time
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P

from varreg.emit import emit_csv
from varreg.problems import example36
from varreg.regularity import dbr_fit, dbr_function
from varreg.variational import solve_critical


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--orders", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--degrees", type=int, nargs="+", default=[8, 10, 12, 14, 16])
    ap.add_argument("--out", type=Path, default=Path("out/example36_sweep.csv"))
    args = ap.parse_args()

    grid = np.linspace(0, 1, 1025)
    rows = {k: [] for k in ("n", "degree", "iterations", "sup_error", "dbr_residual", "seconds")}
    for n in args.orders:
        for D in args.degrees:
            if D < 2 * n:
                continue
            start = time.perf_counter()
            p, exact = example36(n, degree=D)
            u, rep = solve_critical(p)
            err = float(np.max(np.abs(u(grid) - P.polyval(grid, exact))))
            res = dbr_fit(dbr_function(p, u), n).residual
            dt = time.perf_counter() - start
            print(f"n={n} D={D:2d} converged={rep.converged} it={rep.iterations} "
                  f"sup|x-x*|={err:.2e} dbr={res:.2e} {dt:.2f}s")
            for key, val in zip(rows, (n, D, rep.iterations, err, res, dt)):
                rows[key].append(val)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    emit_csv(args.out, list(rows), list(rows.values()))


if __name__ == "__main__":
    main()
