"""Command-line driver.

    varreg solve|diagnose|recover|mollify --config run.cfg [--out DIR] [--svg] [--grid M]
    varreg example36 [--n N] [--config run.cfg] [--out DIR]
    varreg selftest

Exit codes: 0 success, 1 configuration error, 2 solver non-convergence,
3 regularity hypothesis violated, 4 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from .admissible import BoundarySpec
from .config import RunConfig, parse_config, section_items
from .emit import emit_csv, emit_svg
from .errors import ConfigError, ParseError, RegularityError, SolverError, VarregError
from .expr import Lagrangian
from .mollify import CascadeOptions, cascade, cauchy_check
from .problems import example36
from .regularity import dbr_fit, dbr_function, degeneracy_scan, recover_highest, uniform_grid
from .variational import AntiderivativeTerm, Problem, solve_critical

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_REGULARITY, EXIT_INTERNAL = range(5)
COMMANDS = ("solve", "diagnose", "recover", "mollify", "example36", "selftest")


def build_problem(cfg: RunConfig) -> Problem:
    p = cfg.problem
    a, b = p.interval
    spec = BoundarySpec(a, b, p.order, cfg.boundary.left, cfg.boundary.right)
    potential = AntiderivativeTerm(p.forcing, p.forcing_sign) if p.forcing else None
    d = cfg.discretization
    return Problem.build(Lagrangian(p.order, p.lagrangian), spec, d.degree, d.panels, d.nodes,
                         potential=potential)


class _Run:
    def __init__(self, cfg: RunConfig, out: Path, svg: bool):
        self.cfg = cfg
        self.out = out
        self.svg = svg or "svg" in cfg.output.formats
        self.lines = []
        self.nan_files = []
        out.mkdir(parents=True, exist_ok=True)

    def say(self, text=""):
        self.lines.append(text)

    def csv(self, name, header, columns):
        nans = emit_csv(self.out / name, header, columns)
        if nans:
            self.nan_files.append((name, nans))

    def plot(self, name, x, series, **kw):
        if self.svg:
            emit_svg(self.out / name, x, series, **kw)

    def finish(self, code):
        if self.nan_files:
            self.say()
            for name, k in self.nan_files:
                self.say(f"WARNING: {name} contains {k} NaN value(s)")
        self.say()
        self.say(f"exit code: {code}")
        (self.out / "report.txt").write_text("\n".join(self.lines) + "\n")
        return code

    def header(self, command):
        self.say(f"varreg {command}")
        self.say("=" * 40)
        for sec, key, value in section_items(self.cfg):
            self.say(f"{sec}.{key} = {value}")
        self.say()


def _solve(run: _Run, p: Problem):
    s = run.cfg.solver
    t0 = time.perf_counter()
    u, rep = solve_critical(p, tol=s.tol, max_iter=s.max_iter)
    run.say(f"solver: converged={rep.converged} iterations={rep.iterations} "
            f"|grad|_inf={rep.grad_norm:.3e} F={rep.objective:.17g} ({time.perf_counter() - t0:.2f}s)")
    grid = uniform_grid(p.spec.a, p.spec.b, run.cfg.discretization.grid)
    jet = u.jet(grid, p.n)
    run.csv("solution.csv", ["t"] + [f"u{k}" for k in range(p.n + 1)], [grid] + list(jet))
    run.plot("solution.svg", grid, {"u": jet[0]}, ylabel="u")
    return u, rep


def cmd_solve(run: _Run):
    p = build_problem(run.cfg)
    _, rep = _solve(run, p)
    return EXIT_OK if rep.converged else EXIT_SOLVER


def _regularity(run: _Run, strict: bool):
    p = build_problem(run.cfg)
    u, rep = _solve(run, p)
    if not rep.converged:
        return EXIT_SOLVER
    M = run.cfg.discretization.grid
    D = dbr_function(p, u, M)
    fit = dbr_fit(D, p.n)
    run.say(f"du Bois-Reymond fit: degree {p.n}, coefficients (t^0..t^n) = "
            + ", ".join(f"{c:.12g}" for c in fit.coeffs))
    run.say(f"  residual sup|D - p| = {fit.residual:.3e} (tolerance {fit.tolerance:.3e}) -> "
            f"{'critical' if fit.critical else 'NON-CRITICAL'}")
    degenerate = degeneracy_scan(p, u, M)
    if degenerate:
        run.say(f"degeneracy: d2f/dy{p.n}^2 <= 1e-8 at {len(degenerate)} of {M} grid points")
        for t, v in degenerate[:20]:
            run.say(f"  t = {t:.17g}  value = {v:.3e}")
        if len(degenerate) > 20:
            run.say(f"  ... {len(degenerate) - 20} more")
    else:
        run.say("degeneracy: none (d2f/dyn^2 bounded away from zero on the grid)")

    t = D.t
    jet = u.jet(t, p.n)
    s_rec = np.full_like(t, np.nan)
    psi_s = np.full_like(t, np.nan)
    code = EXIT_OK
    try:
        rec = recover_highest(p, u, fit, strict=strict)
    except RegularityError as exc:
        run.say(f"REGULARITY HYPOTHESIS VIOLATED: {type(exc).__name__}: {exc}")
        shown = exc.points[:20]
        for pt in shown:
            run.say(f"  at {pt}")
        if len(exc.points) > 20:
            run.say(f"  ... {len(exc.points) - 20} more")
        code = EXIT_REGULARITY
    else:
        s_rec = rec.s.values
        psi_s = rec.psi_s.values
        run.say(f"recovery of u^({p.n}): max root residual {rec.root_residual:.3e}, "
                f"sup|s - u^({p.n})| = {rec.discrepancy:.3e}, failed points {len(rec.failed)}")
        if rec.monotonicity_violations:
            run.say(f"  monotonicity violations at {len(rec.monotonicity_violations)} points")
        if rec.modulus:
            run.say("  modulus of continuity of s (gap, max |s(t+gap) - s(t)|):")
            for steps, gap, val in rec.modulus:
                run.say(f"    {gap:.6e}  {val:.6e}")
    run.csv("regularity.csv", ["t", "D", "p_fit", "D_minus_fit", "s_recovered", "u_n", "psi_s"],
            [t, D.values, fit.fit.values, D.values - fit.fit.values, s_rec, jet[p.n], psi_s])
    run.plot("dbr_residual.svg", t, {"D - p": D.values - fit.fit.values}, ylabel="residual")
    run.plot("recovery.svg", t, {"s": s_rec, f"u^({p.n})": jet[p.n]})
    return code


def cmd_diagnose(run: _Run):
    code = _regularity(run, strict=False)
    return EXIT_OK if code == EXIT_REGULARITY else code


def cmd_recover(run: _Run):
    return _regularity(run, strict=True)


def cmd_mollify(run: _Run):
    cfg = run.cfg
    m = cfg.mollify
    if not m.source:
        raise ConfigError("mollify.source is required for the mollify command")
    a, b = cfg.problem.interval
    xa = cfg.boundary.left.get(0, 0.0)
    xb = cfg.boundary.right.get(0, 0.0)
    d, s = cfg.discretization, cfg.solver
    opts = CascadeOptions(degree=d.degree, panels=d.panels, nodes=d.nodes, tol=s.tol,
                          max_iter=s.max_iter, grid=d.grid, kernel_nodes=m.kernel_nodes, box=m.box)
    rep = cascade(m.source, m.widths, (a, b, xa, xb), opts)
    violations = cauchy_check(rep)
    run.say(f"cascade: mode {rep.mode}, widths {rep.widths}, slack {rep.slack:.3e}, L_x {rep.lipschitz:.3e}")
    for ell, w in enumerate(rep.widths):
        state = "FAILED" if ell in rep.failed else "ok"
        run.say(f"  level {ell}: eps = {w:.6g}  sup|f_eps - f| = {rep.source_distance[ell]:.3e}  solve {state}")
    run.say("pairwise checks ||x_i'' - x_j''|| <= ||f_i - f_j|| + L_x ||x_i - x_j|| + slack:")
    rows = [[], [], [], [], [], [], [], []]
    for i, j in rep.pairs:
        ok = rep.checks.get((i, j))
        bound = rep.f_diff[i, j] + rep.lipschitz * rep.x0_diff[i, j] + rep.slack
        run.say(f"  ({i},{j}) {rep.x2_diff[i, j]:.6e} <= {bound:.6e} : "
                f"{'pass' if ok else 'FAIL' if ok is not None else 'skipped'}")
        for col, v in zip(rows, (i, j, rep.widths[i], rep.widths[j], rep.x2_diff[i, j], rep.f_diff[i, j],
                                 bound, float(bool(ok)))):
            col.append(v)
    run.say("increments sup|x_{l+1}'' - x_l''|: " + ", ".join(f"{x:.3e}" for x in rep.increments))
    run.csv("cascade_pairs.csv", ["i", "j", "eps_i", "eps_j", "x2_diff", "f_diff", "bound", "pass"], rows)
    cols = [rep.grid]
    header = ["t"]
    for ell, u in enumerate(rep.levels):
        header += [f"x_{ell}", f"x2_{ell}"]
        cols += [u(rep.grid) if u else np.full_like(rep.grid, np.nan),
                 u(rep.grid, 2) if u else np.full_like(rep.grid, np.nan)]
    run.csv("cascade_levels.csv", header, cols)
    run.plot("cascade.svg", rep.grid, {f"x''  eps={w:g}": c for w, c in zip(rep.widths, cols[2::2])})
    if rep.failed:
        return EXIT_SOLVER
    if violations:
        run.say(f"C2 certificate NOT established: {len(violations)} violating pair(s)")
        return EXIT_REGULARITY
    run.say("C2 certificate: all pairwise bounds hold")
    return EXIT_OK


def cmd_example36(run: _Run, n: int):
    d, s = run.cfg.discretization, run.cfg.solver
    p, exact = example36(n, d.degree, d.panels, d.nodes)
    u, rep = solve_critical(p, tol=s.tol, max_iter=s.max_iter)
    run.say(f"x^({2 * n}) + x'' + x^3 = f(t), manufactured x* = (t(1-t))^{n}")
    run.say(f"solver: converged={rep.converged} iterations={rep.iterations} |grad|_inf={rep.grad_norm:.3e}")
    grid = uniform_grid(0.0, 1.0, d.grid)
    x = u(grid)
    xs = np.polynomial.polynomial.polyval(grid, exact)
    err = np.abs(x - xs)
    run.say(f"sup|x - x*| = {err.max():.3e}")
    run.csv("solution.csv", ["t"] + [f"u{k}" for k in range(n + 1)], [grid] + list(u.jet(grid, n)))
    run.csv("example36.csv", ["t", "x", "x_exact", "error"], [grid, x, xs, err])
    run.plot("example36.svg", grid, {"x": x, "x*": xs})
    return EXIT_OK if rep.converged else EXIT_SOLVER


def selftest_checks():
    """(name, passed, detail) for the closed-form oracles."""
    from .problems import beam, quadratic_seed

    out = []
    grid = np.linspace(0, 1, 1025)
    for name, make, exact in (("quadratic seed", quadratic_seed, lambda t: t),
                              ("beam", beam, lambda t: 3 * t ** 2 - 2 * t ** 3)):
        p = make()
        u, rep = solve_critical(p)
        err = float(np.max(np.abs(u(grid) - exact(grid))))
        fit = dbr_fit(dbr_function(p, u), p.n)
        rec = recover_highest(p, u, fit)
        ok = rep.converged and err <= 1e-8 and fit.residual <= 1e-9 and rec.discrepancy <= 1e-8
        out.append((name, ok, f"sup err {err:.2e}, dbr residual {fit.residual:.2e}, "
                              f"recovery {rec.discrepancy:.2e}"))
    p, ex = example36(1)
    u, rep = solve_critical(p)
    err = float(np.max(np.abs(u(grid) - np.polynomial.polynomial.polyval(grid, ex))))
    out.append(("example36 n=1", rep.converged and err <= 1e-4, f"sup err {err:.2e}"))
    p = Problem.build("y1^2/2 + y0^2/2", BoundarySpec.dirichlet(0, 1, 1, 0, 1))
    fit = dbr_fit(dbr_function(p, p.initial()), 1)
    out.append(("non-critical detection", (not fit.critical) and fit.residual >= 1e-3,
                f"residual {fit.residual:.3e}"))
    return out


def cmd_selftest(out=None):
    out = out or sys.stdout
    checks = selftest_checks()
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out)
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_INTERNAL


def make_parser():
    ap = argparse.ArgumentParser(prog="varreg", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out", type=Path)
    ap.add_argument("--svg", action="store_true")
    ap.add_argument("--grid", type=int)
    ap.add_argument("--n", type=int, default=1, help="order n (example36 only)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(command, cfg: RunConfig, out=None, svg=False, n=1) -> int:
    if command == "selftest":
        return cmd_selftest()
    r = _Run(cfg, Path(out) if out else Path(cfg.output.directory), svg)
    r.header(command)
    try:
        if command == "example36":
            code = cmd_example36(r, n)
        else:
            code = {"solve": cmd_solve, "diagnose": cmd_diagnose, "recover": cmd_recover,
                    "mollify": cmd_mollify}[command](r)
    except SolverError as exc:
        r.say(f"solver error: {exc}")
        code = EXIT_SOLVER
    return r.finish(code)


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        if args.command == "selftest":
            return cmd_selftest()
        if args.config is None:
            if args.command != "example36":
                raise ConfigError(f"--config is required for {args.command}")
            cfg = parse_config("", require_problem=False)
        else:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read {args.config}: {exc}") from None
            cfg = parse_config(text, require_problem=args.command != "example36")
        if args.grid is not None:
            if args.grid < 257 or args.grid % 2 == 0:
                raise ConfigError("--grid must be odd and >= 257")
            cfg.discretization.grid = args.grid
        if args.command == "example36" and args.n < 1:
            raise ConfigError("--n must be >= 1")
        code = run(args.command, cfg, args.out, args.svg, args.n)
    except (ConfigError, ParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VarregError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc(file=sys.stderr)
        return EXIT_INTERNAL
    if code == EXIT_SOLVER:
        print("solver did not converge", file=sys.stderr)
    elif code == EXIT_REGULARITY:
        print("regularity hypothesis violated (see report.txt)", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
