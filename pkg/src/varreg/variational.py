"""Energy functional, first and second variation on a polynomial basis, and a
damped Newton search for critical points."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .admissible import Basis, BoundarySpec, Trajectory, build_basis
from .errors import DomainError, NonSmoothError, SolverError
from .expr import Expr, Lagrangian, differentiate, evaluate_like, free_variables, parse

log = logging.getLogger(__name__)

INNER_GAUSS_POINTS = 16


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Composite Gauss-Legendre rule: ``panels`` equal panels, ``nodes`` per panel."""

    a: float
    b: float
    panels: int = 32
    nodes: int = 5
    t: np.ndarray = field(init=False, repr=False)
    w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.panels < 1 or self.nodes < 1:
            raise ValueError("panels and nodes must be positive")
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        edges = np.linspace(self.a, self.b, self.panels + 1)
        half = np.diff(edges) / 2
        mid = (edges[:-1] + edges[1:]) / 2
        object.__setattr__(self, "t", (mid[:, None] + half[:, None] * x[None, :]).ravel())
        object.__setattr__(self, "w", (half[:, None] * w[None, :]).ravel())

    def integrate(self, values) -> float:
        return float(np.sum(self.w * values))


class ExprSource:
    """A right-hand side g(t, x) given as an expression in ``t`` and ``y0``."""

    def __init__(self, expr):
        self.expr = parse(expr) if isinstance(expr, str) else expr
        extra = free_variables(self.expr) - {"t", "y0"}
        if extra:
            raise ValueError(f"source may only use t and y0, found {sorted(extra)}")
        self._dx = differentiate(self.expr, "y0")

    def value(self, t, x):
        return evaluate_like(self.expr, {"t": t, "y0": x}, np.broadcast_shapes(np.shape(t), np.shape(x)))

    def dx(self, t, x):
        return evaluate_like(self._dx, {"t": t, "y0": x}, np.broadcast_shapes(np.shape(t), np.shape(x)))


class AntiderivativeTerm:
    """The integrand contribution sign * int_0^{y0} g(t, s) ds.

    The inner integral uses a 16-point Gauss rule on [0, y0]; its y0-partials
    are g and dg/dx exactly.
    """

    def __init__(self, source, sign: float = 1.0):
        self.source = ExprSource(source) if isinstance(source, (str, Expr)) else source
        self.sign = float(sign)
        self._x, self._w = np.polynomial.legendre.leggauss(INNER_GAUSS_POINTS)

    def value(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        half = x / 2
        s = half[..., None] * (1 + self._x)
        g = self.source.value(np.broadcast_to(t[..., None], s.shape), s)
        return self.sign * half * np.sum(g * self._w, axis=-1)

    def dx(self, t, x):
        return self.sign * self.source.value(t, x)

    def dxx(self, t, x):
        return self.sign * self.source.dx(t, x)


class Problem:
    """Lagrangian + boundary data + basis + quadrature (+ optional antiderivative term)."""

    def __init__(self, lagrangian: Lagrangian, spec: BoundarySpec, basis: Optional[Basis] = None,
                 quad: Optional[Quadrature] = None, potential: Optional[AntiderivativeTerm] = None):
        if lagrangian.order != spec.n:
            raise ValueError(f"Lagrangian order {lagrangian.order} != boundary order {spec.n}")
        self.lagrangian = lagrangian
        self.spec = spec
        self.basis = basis if basis is not None else build_basis(spec)
        if self.basis.spec is not spec and self.basis.spec != spec:
            raise ValueError("basis was built from a different boundary spec")
        self.quad = quad if quad is not None else Quadrature(spec.a, spec.b)
        self.potential = potential
        self.n = spec.n

    @classmethod
    def build(cls, lagrangian, spec: BoundarySpec, degree=12, panels=32, nodes=5, potential=None):
        if isinstance(lagrangian, (str, Expr)):
            lagrangian = Lagrangian(spec.n, lagrangian)
        return cls(lagrangian, spec, build_basis(spec, degree), Quadrature(spec.a, spec.b, panels, nodes),
                   potential)

    @cached_property
    def lift_jet(self) -> np.ndarray:
        return np.stack([self.basis.lift(self.quad.t, k) * np.ones_like(self.quad.t)
                         for k in range(self.n + 1)])

    @cached_property
    def mode_jet(self) -> np.ndarray:
        """Array (n+1, K, Q): k-th mode's j-th derivative at the quadrature nodes."""
        K = self.basis.size
        out = np.zeros((self.n + 1, K, self.quad.t.size))
        for k in range(K):
            m = self.basis.mode(k)
            for j in range(self.n + 1):
                out[j, k] = m(self.quad.t, j)
        return out

    def initial(self) -> Trajectory:
        return self.basis.zero()

    def jet_at_nodes(self, u: Trajectory) -> np.ndarray:
        if u.basis is not self.basis:
            raise ValueError("trajectory was not built on this problem's basis")
        return self.lift_jet + np.einsum("jkq,k->jq", self.mode_jet, u.coeffs)

    # pointwise integrand pieces, usable on any t-array

    def integrand(self, t, jet):
        val = self.lagrangian.value(t, jet)
        if self.potential is not None:
            val = val + self.potential.value(t, jet[0])
        return val

    def partials(self, t, jet):
        if not self.lagrangian.smooth:
            raise NonSmoothError("Lagrangian contains abs; partials unavailable")
        g = self.lagrangian.partials(t, jet)
        if self.potential is not None:
            g[0] = g[0] + self.potential.dx(t, jet[0])
        return g

    def second_partials(self, t, jet):
        if not self.lagrangian.smooth:
            raise NonSmoothError("Lagrangian contains abs; partials unavailable")
        H = self.lagrangian.second_partials(t, jet)
        if self.potential is not None:
            H[0, 0] = H[0, 0] + self.potential.dxx(t, jet[0])
        return H


def _located(fn, p: Problem, *args):
    try:
        return fn(*args)
    except DomainError as exc:
        t = p.quad.t[exc.index] if exc.index is not None else None
        raise DomainError(str(exc), node=exc.node, index=exc.index, t=t) from exc


def objective(p: Problem, u: Trajectory) -> float:
    """Quadrature value of the energy functional at u."""
    jet = p.jet_at_nodes(u)
    vals = _located(p.integrand, p, p.quad.t, jet)
    return p.quad.integrate(vals)


def first_variation(p: Problem, u: Trajectory, direction_jet: np.ndarray) -> float:
    """sum_j int df/dyj * V^(j) dt for a direction given by its jet at the nodes."""
    G = _located(p.partials, p, p.quad.t, p.jet_at_nodes(u))
    return float(np.sum(p.quad.w * np.sum(G * direction_jet, axis=0)))


def gradient(p: Problem, u: Trajectory) -> np.ndarray:
    """First variation in each basis mode."""
    G = _located(p.partials, p, p.quad.t, p.jet_at_nodes(u))
    return np.einsum("jq,jkq->k", G * p.quad.w, p.mode_jet)


def hessian(p: Problem, u: Trajectory, return_asymmetry: bool = False):
    """Second variation matrix in the basis modes, symmetrised after assembly."""
    S = _located(p.second_partials, p, p.quad.t, p.jet_at_nodes(u))
    K = p.basis.size
    H = np.zeros((K, K))
    w = p.quad.w
    for j in range(p.n + 1):
        for i in range(p.n + 1):
            if not np.any(S[j, i]):
                continue
            H += (p.mode_jet[j] * (w * S[j, i])) @ p.mode_jet[i].T
    asym = float(np.max(np.abs(H - H.T))) if K else 0.0
    H = (H + H.T) / 2
    if return_asymmetry:
        return H, asym
    return H


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    grad_norm: float
    objective: float
    history: list = field(default_factory=list)  # (iteration, step length, grad sup-norm, kind)


def _merit(g):
    return float(g @ g)


def _line_search(p, u, d, m0, slope):
    alpha = 1.0
    while alpha >= 1e-12:
        trial = u.with_coeffs(u.coeffs + alpha * d)
        gt = gradient(p, trial)
        if np.all(np.isfinite(gt)) and _merit(gt) <= m0 + 1e-4 * alpha * slope:
            return alpha, trial, gt
        alpha *= 0.5
    return None


def solve_critical(p: Problem, init: Optional[Trajectory] = None, tol: float = 1e-10,
                   max_iter: int = 100):
    """Damped Newton iteration on gradient = 0.

    Steps are accepted by backtracking (factor 0.5, Armijo constant 1e-4) on
    ||gradient||^2. A singular Newton system, or a Newton direction the line
    search rejects, falls back to a steepest-descent step on that merit.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    u = init if init is not None else p.initial()
    g = gradient(p, u)
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    report = SolveReport(False, 0, gnorm, objective(p, u))
    for it in range(max_iter):
        if not np.all(np.isfinite(g)):
            raise SolverError(f"non-finite gradient at iteration {it}")
        if gnorm <= tol:
            report.converged = True
            break
        H = hessian(p, u)
        m0 = _merit(g)
        step = None
        try:
            d = np.linalg.solve(H, -g)
            if np.all(np.isfinite(d)):
                step = _line_search(p, u, d, m0, -2.0 * m0)
                kind = "newton"
        except np.linalg.LinAlgError:
            pass
        if step is None:
            kind = "descent"
            d = -(H @ g)
            if not np.any(d):
                d = -g
            slope = 2.0 * float(g @ (H @ d))
            step = _line_search(p, u, d, m0, min(slope, 0.0))
        report.iterations = it + 1
        if step is None:
            log.debug("line search stalled at iteration %d", it)
            report.history.append((it, 0.0, gnorm, "stalled"))
            break
        alpha, u, g = step
        gnorm = float(np.max(np.abs(g)))
        report.history.append((it, alpha, gnorm, kind))
    else:
        report.converged = max_iter > 0 and gnorm <= tol
    if not np.all(np.isfinite(g)):
        raise SolverError("non-finite gradient")
    report.grad_norm = gnorm
    report.objective = objective(p, u)
    return u, report


def _neville_at_zero(r, q) -> float:
    r = list(map(float, r))
    table = list(map(float, q))
    n = len(r)
    for level in range(1, n):
        for i in range(n - level):
            table[i] = (r[i + level] * table[i] - r[i] * table[i + 1]) / (r[i + level] - r[i])
    return table[0]


def gateaux_check(p: Problem, u: Trajectory, direction, r_values=(1e-3, 5e-4, 2.5e-4)) -> float:
    """Compare the difference quotient (F(u + rV) - F(u)) / r, extrapolated
    to r = 0, with the assembled first variation along V.

    ``direction`` is a coefficient vector on the problem's modes. Returns
    |extrapolated - assembled| / (1 + |assembled|).
    """
    r_values = [float(r) for r in r_values]
    if any(r <= 0 for r in r_values) or any(x <= y for x, y in zip(r_values, r_values[1:])):
        raise ValueError("r_values must be positive and strictly decreasing")
    v = np.asarray(direction, dtype=float)
    f0 = objective(p, u)
    quotients = [(objective(p, u.with_coeffs(u.coeffs + r * v)) - f0) / r for r in r_values]
    extrapolated = _neville_at_zero(r_values, quotients)
    direction_jet = np.einsum("jkq,k->jq", p.mode_jet, v)
    assembled = first_variation(p, u, direction_jet)
    return abs(extrapolated - assembled) / (1 + abs(assembled))
