"""Bump-kernel smoothing of a continuous right-hand side f(t, x) and the
cascade of smoothed Dirichlet problems x'' = f_eps(t, x).

Each smoothed problem is solved variationally through the energy
int [x'^2 / 2 + int_0^x f_eps(t, s) ds] dt, whose critical points satisfy
x'' = f_eps(t, x) weakly. For pairs of levels the cascade checks

    ||x_i'' - x_j''|| <= ||f_i - f_j|| + L_x ||x_i - x_j|| + slack

on a fixed grid. When f does not depend on x the Lipschitz term is absent
and the bound is an identity up to discretisation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .admissible import BoundarySpec, Trajectory, project
from .errors import BoxError, SolverError
from .expr import Expr, evaluate_like, free_variables, parse
from .variational import AntiderivativeTerm, Problem, solve_critical

WHICH = ("value", "dt", "dx", "dxx")


def bump(r):
    """Unnormalised bump exp(-1/(1 - r^2)) on |r| < 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def bump_d1(r):
    r = np.asarray(r, dtype=float)
    q = 1.0 - r ** 2
    with np.errstate(all="ignore"):
        return np.where(np.abs(r) < 1, bump(r) * (-2 * r / q ** 2), 0.0)


def bump_d2(r):
    r = np.asarray(r, dtype=float)
    q = 1.0 - r ** 2
    with np.errstate(all="ignore"):
        val = bump(r) * ((2 * r / q ** 2) ** 2 - (2 * q ** 2 + 8 * r ** 2 * q) / q ** 4)
    return np.where(np.abs(r) < 1, val, 0.0)


@lru_cache(maxsize=None)
def bump_mass() -> float:
    """int_{-1}^{1} exp(-1/(1 - r^2)) dr, by adaptive quadrature."""
    val, _ = integrate.quad(lambda r: math.exp(-1.0 / (1.0 - r * r)), -1, 1, epsabs=1e-15, epsrel=1e-13, limit=200)
    return val


def kernel(r, width):
    """Normalised kernel eta_eps(r) = C exp(-1/(1 - (r/eps)^2)) / eps."""
    return bump(np.asarray(r) / width) / (bump_mass() * width)


def kernel_mass(width) -> float:
    val, _ = integrate.quad(lambda r: float(kernel(np.array(r), width)), -width, width,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


@lru_cache(maxsize=None)
def _discrete_weights(nodes: int):
    """Gauss nodes on (-1, 1) with kernel weights for value, d/dr and d2/dr2.

    Each row is rescaled so that it reproduces its defining moment exactly:
    sum W = 1, -sum W' r = 1, sum W'' r^2 / 2 = 1. Affine functions are then
    smoothed without error by the discrete rule.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    w0 = w * bump(x)
    w0 /= w0.sum()
    w1 = w * bump_d1(x)
    w1 /= -(w1 * x).sum()
    w2 = w * bump_d2(x)
    w2 -= w2.sum() * w0  # zero mass
    w2 /= (w2 * x ** 2).sum() / 2
    return x, w0, w1, w2


@dataclass(frozen=True, eq=False)
class MollifiedFunction:
    """Product-kernel smoothing of ``source`` (an expression in t and y0).

    ``interval`` is the t-range of the data; outside it the source is
    continued by its value at the nearest end. ``box`` is the declared
    x-range of evaluation.
    """

    source: Expr
    width: float
    interval: tuple = (0.0, 1.0)
    box: tuple = (-10.0, 10.0)
    nodes: int = 24

    def __post_init__(self):
        if isinstance(self.source, str):
            object.__setattr__(self, "source", parse(self.source))
        if not self.width > 0:
            raise ValueError("width must be positive")
        extra = free_variables(self.source) - {"t", "y0"}
        if extra:
            raise ValueError(f"source may only use t and y0, found {sorted(extra)}")
        if not (self.interval[0] < self.interval[1] and self.box[0] < self.box[1]):
            raise BoxError(f"bad evaluation box interval={self.interval} box={self.box}")

    @property
    def depends_on_x(self) -> bool:
        return "y0" in free_variables(self.source)

    def _source(self, t, x):
        a, b = self.interval
        return evaluate_like(self.source, {"t": np.clip(t, a, b), "y0": x},
                             np.broadcast_shapes(np.shape(t), np.shape(x)))

    def _check_box(self, t, x):
        a, b = self.interval
        lo, hi = self.box
        e = self.width
        if np.any(t < a - e) or np.any(t > b + e) or np.any(x < lo - e) or np.any(x > hi + e):
            raise BoxError(f"evaluation point outside t in [{a}, {b}], x in [{lo}, {hi}] expanded by {e}")

    def __call__(self, t, x, which="value"):
        return mollify_value(self, t, x, which)

    # AntiderivativeTerm source protocol
    def value(self, t, x):
        return mollify_value(self, t, x, "value")

    def dx(self, t, x):
        return mollify_value(self, t, x, "dx")


_CHUNK = 4096


def mollify_value(mf: MollifiedFunction, t, x, which="value"):
    """Value or first/second partial of the smoothed function at (t, x).

    Tensor Gauss quadrature of the source against the (differentiated)
    product kernel; array arguments broadcast.
    """
    if which not in WHICH:
        raise ValueError(f"which must be one of {WHICH}")
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    shape = np.broadcast_shapes(t.shape, x.shape)
    tt = np.broadcast_to(t, shape).ravel()
    xx = np.broadcast_to(x, shape).ravel()
    mf._check_box(tt, xx)
    r, w0, w1, w2 = _discrete_weights(mf.nodes)
    e = mf.width
    off = e * r
    wt = {"value": w0, "dt": w1 / e, "dx": w0, "dxx": w0}[which]
    wx = {"value": w0, "dt": w0, "dx": w1 / e, "dxx": w2 / e ** 2}[which]
    out = np.empty(tt.size)
    if not mf.depends_on_x:
        if which in ("dx", "dxx"):
            return np.zeros(shape) if shape else 0.0
        for lo in range(0, tt.size, _CHUNK):
            sl = slice(lo, lo + _CHUNK)
            ts = tt[sl, None] - off[None, :]
            vals = mf._source(ts, np.zeros_like(ts))
            out[sl] = vals @ wt
    else:
        q = r.size
        chunk = max(1, _CHUNK // q)
        for lo in range(0, tt.size, chunk):
            sl = slice(lo, lo + chunk)
            ts = tt[sl, None, None] - off[None, :, None]
            xs = xx[sl, None, None] - off[None, None, :]
            vals = mf._source(ts, xs)
            out[sl] = np.einsum("pij,i,j->p", vals, wt, wx)
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def sup_distance_to_source(mf: MollifiedFunction, t, x=0.0) -> float:
    vals = mollify_value(mf, t, x)
    return float(np.max(np.abs(vals - mf._source(np.asarray(t), np.asarray(x)))))


@dataclass
class CascadeOptions:
    degree: int = 12
    panels: int = 32
    nodes: int = 5
    tol: float = 1e-10
    max_iter: int = 100
    grid: int = 1025
    kernel_nodes: int = 24
    box: tuple = (-10.0, 10.0)
    x_samples: int = 33

    @property
    def slack(self) -> float:
        h = 1.0 / (self.grid - 1)
        return 2 * (100 * self.tol + h ** 2)


@dataclass
class CascadeReport:
    widths: list
    levels: list  # Trajectory or None for failed levels
    problems: list
    failed: list
    grid: np.ndarray
    f_values: list  # smoothed source on the (t, x) sample grid, per level
    f_diff: np.ndarray  # sup ||f_i - f_j||
    x2_diff: np.ndarray  # sup ||x_i'' - x_j''||
    x1_diff: np.ndarray
    x0_diff: np.ndarray
    lipschitz: float
    slack: float
    mode: str  # "t-only" or "general"
    checks: dict = field(default_factory=dict)  # (i, j) -> bool
    increments: list = field(default_factory=list)  # consecutive sup ||x_{l+1}'' - x_l''||
    increments_x1: list = field(default_factory=list)
    increments_x0: list = field(default_factory=list)
    source_distance: list = field(default_factory=list)  # sup ||f_l - f||

    @property
    def pairs(self):
        L = len(self.widths)
        return [(i, j) for i in range(L) for j in range(i + 1, L)]


def _lipschitz_x(source: Expr, interval, xlo, xhi, samples=33, t_samples=65) -> float:
    if "y0" not in free_variables(source):
        return 0.0
    t = np.linspace(interval[0], interval[1], t_samples)[:, None]
    x = np.linspace(xlo, xhi, samples)[None, :]
    vals = evaluate_like(source, {"t": t, "y0": x}, (t_samples, samples))
    dq = np.abs(np.diff(vals, axis=1)) / np.diff(x, axis=1)
    return float(np.max(dq))


def _pair_norms(levels, grid):
    L = len(levels)
    out = [np.full((L, L), np.nan) for _ in range(3)]
    derivs = [None if u is None else [u(grid, k) for k in range(3)] for u in levels]
    for i in range(L):
        for j in range(L):
            if derivs[i] is None or derivs[j] is None:
                continue
            for k in range(3):
                out[k][i, j] = float(np.max(np.abs(derivs[i][k] - derivs[j][k])))
    return out  # x0, x1, x2


def _evaluate_checks(report: CascadeReport):
    x0, x1, x2 = _pair_norms(report.levels, report.grid)
    report.x0_diff, report.x1_diff, report.x2_diff = x0, x1, x2
    checks = {}
    for i, j in report.pairs:
        if np.isnan(x2[i, j]):
            continue
        bound = report.f_diff[i, j] + report.lipschitz * x0[i, j] + report.slack
        checks[(i, j)] = bool(x2[i, j] <= bound)
    report.checks = checks
    ok = [ell for ell in range(len(report.levels)) if report.levels[ell] is not None]
    report.increments = [float(x2[a, b]) for a, b in zip(ok, ok[1:])]
    report.increments_x1 = [float(x1[a, b]) for a, b in zip(ok, ok[1:])]
    report.increments_x0 = [float(x0[a, b]) for a, b in zip(ok, ok[1:])]
    return checks


def cascade(source, widths: Sequence[float], bc: tuple = (0.0, 1.0, 0.0, 0.0),
            options: Optional[CascadeOptions] = None) -> CascadeReport:
    """Solve x'' = f_eps(t, x) for each width and compare the levels.

    ``bc`` is (a, b, x(a), x(b)). A level whose solve fails is recorded in
    ``failed`` and skipped by the pairwise checks.
    """
    opts = options or CascadeOptions()
    source = parse(source) if isinstance(source, str) else source
    widths = [float(w) for w in widths]
    if any(w <= 0 for w in widths) or any(x <= y for x, y in zip(widths, widths[1:])):
        raise ValueError("widths must be positive and strictly decreasing")
    a, b, xa, xb = bc
    spec = BoundarySpec.dirichlet(a, b, 1, xa, xb)
    grid = np.linspace(a, b, opts.grid)
    levels, problems, failed, mfs = [], [], [], []
    for ell, w in enumerate(widths):
        mf = MollifiedFunction(source, w, (a, b), tuple(opts.box), opts.kernel_nodes)
        mfs.append(mf)
        p = Problem.build("y1^2/2", spec, opts.degree, opts.panels, opts.nodes,
                          potential=AntiderivativeTerm(mf, 1.0))
        problems.append(p)
        try:
            u, rep = solve_critical(p, tol=opts.tol, max_iter=opts.max_iter)
        except (SolverError, BoxError):
            u, rep = None, None
        if rep is None or not rep.converged:
            failed.append(ell)
            u = None
        levels.append(u)

    general = "y0" in free_variables(source)
    if general:
        xs_all = [u(grid) for u in levels if u is not None]
        lo = min([float(np.min(v)) for v in xs_all] + [min(xa, xb)])
        hi = max([float(np.max(v)) for v in xs_all] + [max(xa, xb)])
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        lo, hi = max(lo, opts.box[0]), min(hi, opts.box[1])
        xgrid = np.linspace(lo, hi, opts.x_samples)
        T, X = np.meshgrid(grid, xgrid, indexing="ij")
        lipschitz = _lipschitz_x(source, (a, b), lo, hi, opts.x_samples)
    else:
        T, X = grid, np.zeros_like(grid)
        lipschitz = 0.0
    f_values = [mollify_value(mf, T, X) for mf in mfs]
    raw = evaluate_like(source, {"t": T, "y0": X}, np.shape(T))
    L = len(widths)
    f_diff = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            f_diff[i, j] = float(np.max(np.abs(f_values[i] - f_values[j])))
    report = CascadeReport(
        widths=widths, levels=levels, problems=problems, failed=failed, grid=grid,
        f_values=f_values, f_diff=f_diff, x2_diff=None, x1_diff=None, x0_diff=None,
        lipschitz=lipschitz, slack=opts.slack, mode="general" if general else "t-only",
        source_distance=[float(np.max(np.abs(fv - raw))) for fv in f_values],
    )
    _evaluate_checks(report)
    return report


def cauchy_check(report: CascadeReport):
    """Pairs (i, j) violating the sup-norm bound, recomputed from the stored levels."""
    checks = _evaluate_checks(report)
    return [pair for pair, ok in sorted(checks.items()) if not ok]


def corrupt_level(report: CascadeReport, level: int, perturbation) -> None:
    """Add a (projected) perturbation of t to one level's trajectory, in place."""
    u = report.levels[level]
    delta = project(u.basis, lambda t: perturbation(t) + u.basis.lift(t)).coeffs
    report.levels[level] = Trajectory(u.basis, u.coeffs + delta)
