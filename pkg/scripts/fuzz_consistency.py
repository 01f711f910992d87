"""Gateaux, gradient and Hessian consistency on randomly generated smooth
problems; reports the worst discrepancies."""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from fuzz import random_problem  # noqa: E402
from varreg.variational import gateaux_check, gradient, hessian, objective  # noqa: E402


def fd(fn, c, h=1e-6):
    cols = []
    for k in range(c.size):
        e = np.zeros(c.size)
        e[k] = h
        cols.append((fn(c + e) - fn(c - e)) / (2 * h))
    return np.array(cols)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--problems", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    worst = {"gateaux": 0.0, "gradient": 0.0, "hessian": 0.0, "asymmetry": 0.0}
    for s in range(args.seed, args.seed + args.problems):
        p, u, rng = random_problem(s)
        worst["gateaux"] = max(worst["gateaux"], gateaux_check(p, u, rng.normal(size=p.basis.size)))
        g = gradient(p, u)
        g_fd = fd(lambda c: objective(p, u.with_coeffs(c)), u.coeffs)
        worst["gradient"] = max(worst["gradient"], float(np.max(np.abs(g - g_fd) / (1 + np.abs(g)))))
        H, asym = hessian(p, u, return_asymmetry=True)
        H_fd = fd(lambda c: gradient(p, u.with_coeffs(c)), u.coeffs).T
        worst["hessian"] = max(worst["hessian"], float(np.max(np.abs(H - H_fd) / (1 + np.abs(H)))))
        worst["asymmetry"] = max(worst["asymmetry"], asym)
    for k, v in worst.items():
        print(f"{k:10s} {v:.2e}")


if __name__ == "__main__":
    main()
