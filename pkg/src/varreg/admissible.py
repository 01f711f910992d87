"""Endpoint-derivative boundary data, polynomial lifts, homogeneous bases and
trajectories.

All polynomials are stored by their coefficients in the shifted variable
s = (t - a) / (b - a); a t-derivative of order k carries the factor
(b - a)**(-k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import BasisError, BoundaryError

RANK_TOL = 1e-10


@dataclass(frozen=True)
class BoundarySpec:
    """Interval [a, b], order n and prescribed endpoint derivatives.

    ``left`` maps i -> u^(i)(a) for i in N, ``right`` maps j -> u^(j)(b) for j in N'.
    """

    a: float
    b: float
    n: int
    left: Mapping[int, float] = field(default_factory=dict)
    right: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.a < self.b:
            raise BoundaryError(f"need a < b, got [{self.a}, {self.b}]")
        if self.n < 1:
            raise BoundaryError("order must be >= 1")
        for side, m in (("left", self.left), ("right", self.right)):
            for k in m:
                if int(k) != k or not 0 <= k <= self.n:
                    raise BoundaryError(f"{side} derivative index {k} outside 0..{self.n}")
        object.__setattr__(self, "left", {int(k): float(v) for k, v in sorted(self.left.items())})
        object.__setattr__(self, "right", {int(k): float(v) for k, v in sorted(self.right.items())})

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def full_order(self) -> bool:
        full = set(range(self.n + 1))
        return set(self.left) == full and set(self.right) == full

    def constraints(self):
        """List of (s-endpoint, derivative order, value) triples."""
        return [(0.0, i, u) for i, u in self.left.items()] + [(1.0, j, w) for j, w in self.right.items()]

    @classmethod
    def dirichlet(cls, a, b, n, ua, ub):
        return cls(a, b, n, {0: ua}, {0: ub})


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Polynomial on [a, b] with coefficients c0..cD in s = (t - a)/(b - a)."""

    coeffs: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def s(self, t):
        return (np.asarray(t, dtype=float) - self.a) / (self.b - self.a)

    def derivative_coeffs(self, k: int) -> np.ndarray:
        if k > self.degree:
            return np.zeros(1)
        return P.polyder(self.coeffs, k) * (self.b - self.a) ** (-k) if k else self.coeffs

    def __call__(self, t, k: int = 0):
        out = P.polyval(self.s(t), self.derivative_coeffs(k))
        return float(out) if np.ndim(out) == 0 else out

    def to_power_basis(self) -> np.ndarray:
        """Coefficients in t (lowest degree first)."""
        h = self.b - self.a
        # substitute s = (t - a)/h
        lin = np.array([-self.a / h, 1.0 / h])
        out = np.zeros(1)
        for c in self.coeffs[::-1]:
            out = P.polyadd(P.polymul(out, lin), [c])
        return out

    @classmethod
    def from_power_basis(cls, tcoeffs, a, b):
        """Build from coefficients in t."""
        h = b - a
        lin = np.array([a, h])  # t = a + h s
        out = np.zeros(1)
        for c in np.asarray(tcoeffs, dtype=float)[::-1]:
            out = P.polyadd(P.polymul(out, lin), [c])
        return cls(out, a, b)


def _functional_row(s0: float, order: int, degree: int, h: float = 1.0) -> np.ndarray:
    """Row r with r @ c = d^order/dt^order of sum c_k s^k at s = s0."""
    row = np.zeros(degree + 1)
    for k in range(order, degree + 1):
        row[k] = math.perm(k, order) * s0 ** (k - order)
    return row * h ** (-order)


def constraint_matrix(spec: BoundarySpec, degree: int, scaled: bool = True) -> np.ndarray:
    h = spec.length if scaled else 1.0
    rows = [_functional_row(s0, i, degree, h) for s0, i, _ in spec.constraints()]
    return np.array(rows).reshape(len(rows), degree + 1)


def _paper_lift(spec: BoundarySpec) -> np.ndarray:
    # Iterative construction for full-order data with w0 != u0: starting from
    # the secant line V0, each step adds G_k (V0 - u0)^k (V0 - w0)^k with G_k
    # linear, which fixes the k-th derivatives at both ends and leaves all
    # lower ones untouched.
    a, b, n = spec.a, spec.b, spec.n
    u, w = spec.left, spec.right
    h = b - a
    du = w[0] - u[0]
    v0 = np.array([u[0], du])
    v0_minus_u0 = np.array([0.0, du])
    v0_minus_w0 = np.array([-du, du])
    V = v0.copy()
    for k in range(1, n + 1):
        cur = Polynomial(V, a, b)
        scale = h ** k / (math.factorial(k) * du ** (2 * k))
        A = (-1) ** k * scale * (u[k] - cur(a, k))
        B = scale * (w[k] - cur(b, k))
        G = np.array([A, B - A])
        bump = P.polymul(P.polypow(v0_minus_u0, k), P.polypow(v0_minus_w0, k))
        V = P.polyadd(V, P.polymul(G, bump))
    return V


def _hermite_lift(spec: BoundarySpec) -> np.ndarray:
    m = len(spec.constraints())
    if m == 0:
        return np.zeros(1)
    rhs = np.array([v for _, _, v in spec.constraints()])
    degree = max(m - 1, 0)
    while True:
        A = constraint_matrix(spec, degree)
        if np.linalg.matrix_rank(A, tol=RANK_TOL * np.abs(A).max()) == m:
            c, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            return c
        degree += 1
        if degree > m + 2 * spec.n + 2:
            raise BoundaryError("endpoint-derivative system could not be solved")


def build_lift(spec: BoundarySpec) -> Polynomial:
    """A polynomial satisfying every prescribed endpoint derivative.

    Full-order data with distinct end values use the closed-form iterative
    construction (degree 2n + 1); every other case falls back to the
    lowest-degree solution of the endpoint-derivative linear system.
    """
    if spec.full_order and spec.right[0] != spec.left[0]:
        coeffs = _paper_lift(spec)
    else:
        coeffs = _hermite_lift(spec)
    return Polynomial(coeffs, spec.a, spec.b)


@dataclass(frozen=True, eq=False)
class Basis:
    spec: BoundarySpec
    degree: int
    lift: Polynomial
    modes: np.ndarray  # (K, degree + 1) orthonormal coefficient rows, in s

    @property
    def size(self) -> int:
        return self.modes.shape[0]

    def mode(self, k: int) -> Polynomial:
        return Polynomial(self.modes[k], self.spec.a, self.spec.b)

    def zero(self) -> "Trajectory":
        return Trajectory(self, np.zeros(self.size))


def build_basis(spec: BoundarySpec, degree: int = 12) -> Basis:
    """Orthonormal null-space basis of the homogeneous endpoint conditions
    among polynomials of the given degree."""
    m = len(spec.constraints())
    if degree + 1 < m:
        raise BasisError(f"degree {degree} too small for {m} endpoint conditions")
    if m == 0:
        modes = np.eye(degree + 1)
    else:
        A = constraint_matrix(spec, degree, scaled=False)
        _, sv, vt = np.linalg.svd(A)
        rank = int(np.sum(sv > RANK_TOL * sv[0]))
        modes = vt[rank:]
    return Basis(spec, degree, build_lift(spec), modes)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """u(t) = lift(t) + sum_k coeffs[k] * mode_k(t)."""

    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != self.basis.size:
            raise ValueError(f"expected {self.basis.size} coefficients, got {c.shape[0]}")
        object.__setattr__(self, "coeffs", c)

    @cached_property
    def poly(self) -> Polynomial:
        lift = self.basis.lift.coeffs
        modal = self.coeffs @ self.basis.modes if self.basis.size else np.zeros(1)
        return Polynomial(P.polyadd(lift, modal), self.basis.spec.a, self.basis.spec.b)

    def __call__(self, t, k: int = 0):
        return eval_trajectory(self, t, k)

    def jet(self, t, n: int) -> np.ndarray:
        return np.stack([np.broadcast_to(self.poly(t, k), np.shape(t)) for k in range(n + 1)])

    def with_coeffs(self, coeffs) -> "Trajectory":
        return Trajectory(self.basis, coeffs)


def eval_trajectory(u: Trajectory, t, k: int = 0):
    """k-th t-derivative of u; t must lie in [a, b]."""
    if k < 0:
        raise ValueError("derivative order must be >= 0")
    spec = u.basis.spec
    tt = np.asarray(t, dtype=float)
    if np.any(tt < spec.a) or np.any(tt > spec.b):
        raise ValueError(f"t outside [{spec.a}, {spec.b}]")
    return u.poly(t, k)


def project(basis: Basis, target) -> Trajectory:
    """Trajectory on ``basis`` closest (in coefficient space) to ``target``.

    ``target`` is a Polynomial on the same interval or a callable of t; a
    callable is first interpolated at Chebyshev points with the basis degree.
    """
    a, b = basis.spec.a, basis.spec.b
    D = basis.degree
    if not isinstance(target, Polynomial):
        x = np.cos(np.pi * (np.arange(D + 1) + 0.5) / (D + 1))
        s = (x + 1) / 2
        vals = np.asarray(target(a + (b - a) * s), dtype=float)
        target = Polynomial(P.polyfit(s, vals, D), a, b)
    width = max(D + 1, len(target.coeffs), len(basis.lift.coeffs))
    diff = np.zeros(width)
    diff[: len(target.coeffs)] += target.coeffs
    diff[: len(basis.lift.coeffs)] -= basis.lift.coeffs
    if np.any(np.abs(diff[D + 1:]) > 1e-12 * max(1.0, np.abs(diff).max())):
        raise BasisError("target degree exceeds the basis degree")
    return Trajectory(basis, basis.modes @ diff[: D + 1])


def norms(u: Trajectory, n: int, grid_size: int = 257):
    """(sum of L2 norms, sum of grid sup norms) of u, u', ..., u^(n)."""
    if grid_size < 65:
        raise ValueError("grid_size must be >= 65")
    a, b = u.basis.spec.a, u.basis.spec.b
    npts = u.poly.degree + 2
    x, w = np.polynomial.legendre.leggauss(npts)
    tq = a + (b - a) * (x + 1) / 2
    wq = w * (b - a) / 2
    grid = np.linspace(a, b, grid_size)
    sobolev = 0.0
    cn = 0.0
    for i in range(n + 1):
        sobolev += math.sqrt(float(np.sum(wq * u.poly(tq, i) ** 2)))
        cn += float(np.max(np.abs(u.poly(grid, i))))
    return sobolev, cn
