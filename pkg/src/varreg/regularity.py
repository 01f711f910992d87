"""Executable regularity diagnostics for computed critical points.

Along a trajectory u the partials h0_j(t) = df/dyj(t, jet u(t)) are integrated
repeatedly from a; the alternating sum

    D(t) = sum_{m=0}^{n} (-1)^m I^m[df/dy_{n-m}](t)

is a polynomial of degree <= n exactly when u is critical. The highest
derivative is then recovered pointwise as the root s(t) of

    g(t, s) = psi(t, s) + sum_{m>=1} (-1)^m I^m[df/dy_{n-m}](t) - p(t),

with psi(t, s) = df/dyn evaluated with u^(n)(t) replaced by s and p the
fitted polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Legendre

from .admissible import Trajectory
from .errors import (
    DegeneracyError,
    MonotonicityError,
    NotCriticalError,
    SurjectivityError,
)
from .expr import evaluate_like
from .variational import Problem

DEFAULT_GRID = 1025
DEGENERACY_THRESHOLD = 1e-8
ROOT_RESIDUAL_TOL = 1e-10
MAX_DOUBLINGS = 60


@dataclass(frozen=True, eq=False)
class SampledFunction:
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("t and values must be 1-d arrays of equal length")
        if t.size < 257 or t.size % 2 == 0:
            raise ValueError(f"grid must have an odd number of points >= 257, got {t.size}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0])

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        return SampledFunction(self.t, self.values + other.values)

    def __sub__(self, other):
        return SampledFunction(self.t, self.values - other.values)

    def scaled(self, c):
        return SampledFunction(self.t, c * self.values)


def uniform_grid(a, b, M=DEFAULT_GRID) -> np.ndarray:
    if M < 257 or M % 2 == 0:
        raise ValueError(f"grid must have an odd number of points >= 257, got {M}")
    return np.linspace(a, b, M)


def cumulative_simpson(v: np.ndarray, h: float) -> np.ndarray:
    """Running integral from the first node on a uniform odd grid.

    Even nodes accumulate composite Simpson panels; odd nodes add a half
    panel from the cubic through four neighbouring nodes. Both pieces are
    exact for cubics.
    """
    M = v.size
    out = np.zeros(M)
    panels = h / 3 * (v[0:-2:2] + 4 * v[1:-1:2] + v[2::2])
    out[2::2] = np.cumsum(panels)
    # half panel [x_{2j}, x_{2j+1}] using x_{2j}..x_{2j+3}
    j = np.arange(0, M - 3, 2)
    half = h / 24 * (9 * v[j] + 19 * v[j + 1] - 5 * v[j + 2] + v[j + 3])
    out[j + 1] = out[j] + half
    # last odd node: second interval of the stencil x_{M-4}..x_{M-1}
    last = h / 24 * (-v[M - 4] + 13 * v[M - 3] + 13 * v[M - 2] - v[M - 1])
    out[M - 2] = out[M - 3] + last
    return out


def iterated_antiderivative(h: SampledFunction, m: int) -> SampledFunction:
    """Apply m times the running Simpson integral starting from zero at a."""
    if m < 0:
        raise ValueError("m must be >= 0")
    v = h.values.copy()
    for _ in range(m):
        v = cumulative_simpson(v, h.h)
    return SampledFunction(h.t, v)


def _grid_jet(p: Problem, u: Trajectory, M: int):
    t = uniform_grid(p.spec.a, p.spec.b, M)
    return t, u.jet(t, p.n)


def _alternating_terms(p: Problem, t, jet):
    """Return (psi along the jet, sum_{m>=1} (-1)^m I^m[df/dy_{n-m}])."""
    n = p.n
    G = p.partials(t, jet)
    rest = np.zeros_like(t)
    for m in range(1, n + 1):
        rest += (-1) ** m * iterated_antiderivative(SampledFunction(t, G[n - m]), m).values
    return G[n], rest


def dbr_function(p: Problem, u: Trajectory, M: int = DEFAULT_GRID) -> SampledFunction:
    """The alternating sum of iterated antiderivatives sampled on a uniform grid."""
    t, jet = _grid_jet(p, u, M)
    lead, rest = _alternating_terms(p, t, jet)
    return SampledFunction(t, lead + rest)


@dataclass
class DbrReport:
    D: SampledFunction
    coeffs: np.ndarray  # c0..cn, in powers of t
    fit: SampledFunction
    residual: float
    tolerance: float
    critical: bool

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1


def dbr_fit(D: SampledFunction, n: int, tolerance=None) -> DbrReport:
    """Least-squares degree-n fit (Legendre basis on the grid interval)."""
    if D.t.size <= n + 1:
        raise ValueError("grid too small for the fit")
    domain = [D.t[0], D.t[-1]]
    fit = Legendre.fit(D.t, D.values, n, domain=domain)
    values = fit(D.t)
    residual = float(np.max(np.abs(D.values - values)))
    if tolerance is None:
        tolerance = 1e-7 * (1 + D.sup())
    coeffs = fit.convert(kind=np.polynomial.Polynomial, domain=domain, window=domain).coef
    coeffs = np.pad(coeffs, (0, n + 1 - len(coeffs)))
    return DbrReport(D, coeffs, SampledFunction(D.t, values), residual, tolerance, residual <= tolerance)


def degeneracy_scan(p: Problem, u: Trajectory, M: int = DEFAULT_GRID,
                    threshold: float = DEGENERACY_THRESHOLD):
    """Grid points where |d2f/dyn^2| along the jet is at most ``threshold``."""
    t, jet = _grid_jet(p, u, M)
    return _degenerate_points(p, t, jet, threshold)


def _lagrangian_second(p, t, jet):
    expr = p.lagrangian.second[p.n][p.n]
    return evaluate_like(expr, p.lagrangian.bindings(t, jet), t)


def _degenerate_points(p, t, jet, threshold):
    vals = _lagrangian_second(p, t, jet)
    idx = np.flatnonzero(np.abs(vals) <= threshold)
    return [(float(t[i]), float(vals[i])) for i in idx]


@dataclass
class RecoveryReport:
    s: SampledFunction
    u_n: SampledFunction
    psi_s: SampledFunction
    root_residual: float
    discrepancy: float
    failed: list = field(default_factory=list)
    monotonicity_violations: list = field(default_factory=list)
    modulus: list = field(default_factory=list)  # (gap in grid steps, gap in t, max |s(t+gap) - s(t)|)


def solve_monotone(g, dg, s0, max_doublings=MAX_DOUBLINGS, max_iter=200, ftol=1e-13):
    """Vectorised root search for increasing scalar maps s -> g(i, s).

    ``g(s)`` and ``dg(s)`` take an array with one entry per problem. The
    bracket grows by doubling steps away from ``s0``; the root is then
    refined by Newton steps kept inside the bracket, bisecting otherwise.
    Returns (roots, |g(roots)|, non-monotone mask, unbracketed mask).
    """
    s0 = np.asarray(s0, dtype=float)
    g0 = g(s0)
    bad_slope = dg(s0) <= 0
    lo = s0.copy()
    hi = s0.copy()
    glo = g0.copy()
    ghi = g0.copy()
    up = g0 < 0  # root lies above s0
    down = g0 > 0
    step = np.ones_like(s0)
    exact = np.abs(g0) <= ftol
    unbracketed = ~exact & (up | down)
    for _ in range(max_doublings):
        if not np.any(unbracketed):
            break
        trial = np.where(up, hi + step, lo - step)
        gt = g(trial)
        bad_slope |= unbracketed & (dg(trial) <= 0)
        move_up = unbracketed & up
        move_down = unbracketed & down
        # advance the bracket end that is still on the wrong side
        lo = np.where(move_up, hi, lo)
        glo = np.where(move_up, ghi, glo)
        hi = np.where(move_up, trial, hi)
        ghi = np.where(move_up, gt, ghi)
        hi = np.where(move_down, lo, hi)
        ghi = np.where(move_down, glo, ghi)
        lo = np.where(move_down, trial, lo)
        glo = np.where(move_down, gt, glo)
        unbracketed = (move_up & (gt < 0)) | (move_down & (gt > 0))
        step = np.where(unbracketed, 2 * step, step)
    x = np.where(exact, s0, np.where(up, hi, lo))
    gx = g(x)
    for _ in range(max_iter):
        active = ~exact & ~unbracketed & (np.abs(gx) > ftol) & (hi - lo > 4 * np.finfo(float).eps * np.maximum(1, np.abs(x)))
        if not np.any(active):
            break
        d = dg(x)
        bad_slope |= active & (d <= 0)
        with np.errstate(all="ignore"):
            newton = x - gx / d
        inside = (d > 0) & (newton > lo) & (newton < hi)
        nxt = np.where(inside, newton, (lo + hi) / 2)
        gn = g(nxt)
        neg = gn < 0
        lo = np.where(active & neg, nxt, lo)
        hi = np.where(active & ~neg, nxt, hi)
        x = np.where(active, nxt, x)
        gx = np.where(active, gn, gx)
    return x, np.abs(gx), bad_slope, unbracketed


def _modulus_table(s: SampledFunction):
    table = []
    gap = 1
    while gap < s.t.size:
        table.append((gap, gap * s.h, float(np.max(np.abs(s.values[gap:] - s.values[:-gap])))))
        gap *= 2
    return table


def recover_highest(p: Problem, u: Trajectory, fit: DbrReport, strict: bool = True) -> RecoveryReport:
    """Recover u^(n) on the fit's grid as the root of g(t, .) at every node.

    With ``strict`` any failed hypothesis raises; otherwise failures are
    recorded in the report and affected nodes carry NaN.
    """
    if not fit.critical:
        raise NotCriticalError(
            f"du Bois-Reymond residual {fit.residual:.3e} exceeds {fit.tolerance:.3e}")
    t = fit.D.t
    jet = u.jet(t, p.n)
    degenerate = _degenerate_points(p, t, jet, DEGENERACY_THRESHOLD)
    degenerate_mask = np.abs(_lagrangian_second(p, t, jet)) <= DEGENERACY_THRESHOLD
    if degenerate and strict:
        raise DegeneracyError(f"d2f/dyn^2 vanishes at {len(degenerate)} grid points", degenerate)
    n = p.n
    _, rest = _alternating_terms(p, t, jet)
    target = fit.fit.values - rest
    dyn = p.lagrangian.dy[n]
    dynn = p.lagrangian.second[n][n]

    def with_s(s):
        j = list(jet[:n]) + [s]
        return p.lagrangian.bindings(t, j)

    def g(s):
        return evaluate_like(dyn, with_s(s), t) - target

    def dg(s):
        return evaluate_like(dynn, with_s(s), t)

    s, resid, bad_slope, unbracketed = solve_monotone(g, dg, jet[n])
    if np.any(unbracketed) and strict:
        pts = [float(x) for x in t[unbracketed]]
        raise SurjectivityError(
            f"no sign change within {MAX_DOUBLINGS} doublings at {len(pts)} grid points", pts)
    if np.any(bad_slope) and strict:
        pts = [float(x) for x in t[bad_slope]]
        raise MonotonicityError(
            f"d psi/ds <= 0 sampled at {len(pts)} grid points", pts)
    # at degenerate points the root is not unique, so nothing is recovered there
    failed_mask = unbracketed | degenerate_mask | (resid > ROOT_RESIDUAL_TOL)
    s = np.where(unbracketed | degenerate_mask, np.nan, s)
    s_fn = SampledFunction(t, s)
    un = SampledFunction(t, jet[n])
    psi_s = SampledFunction(t, dg(jet[n]))
    ok = ~failed_mask
    return RecoveryReport(
        s=s_fn,
        u_n=un,
        psi_s=psi_s,
        root_residual=float(np.max(resid[ok])) if np.any(ok) else float("nan"),
        discrepancy=float(np.max(np.abs(s[ok] - jet[n][ok]))) if np.any(ok) else float("nan"),
        failed=[float(x) for x in t[failed_mask]],
        monotonicity_violations=[float(x) for x in t[bad_slope]],
        modulus=_modulus_table(s_fn) if np.all(ok) else [],
    )
