"""Ready-made problems: analytic seeds and the manufactured Dirichlet
problem x^(2n) + x'' + x^3 = f(t)."""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as P

from .admissible import BoundarySpec
from .expr import Expr, Var, binary, const, differentiate, power
from .variational import AntiderivativeTerm, Problem


def quadratic_seed(degree=12, panels=32, nodes=5) -> Problem:
    """f = y1^2/2 on [0, 1] with u(0) = 0, u(1) = 1; critical point u = t."""
    return Problem.build("y1^2/2", BoundarySpec.dirichlet(0.0, 1.0, 1, 0.0, 1.0), degree, panels, nodes)


def beam(degree=12, panels=32, nodes=5) -> Problem:
    """f = y2^2/2 with clamped ends u(0)=0, u'(0)=0, u(1)=1, u'(1)=0; u = 3t^2 - 2t^3."""
    spec = BoundarySpec(0.0, 1.0, 2, {0: 0.0, 1: 0.0}, {0: 1.0, 1: 0.0})
    return Problem.build("y2^2/2", spec, degree, panels, nodes)


def example36_lagrangian(n: int) -> str:
    sign = "" if n % 2 == 0 else "-"
    return f"{sign}1/2*y{n}^2 - 1/2*y1^2 + 1/4*y0^4"


def manufactured_solution(n: int) -> np.ndarray:
    """Power coefficients of x*(t) = (t (1 - t))^n."""
    return P.polypow([0.0, 1.0, -1.0], n)


def _poly_expr(coeffs) -> Expr:
    t = Var("t")
    terms = [const(c) if k == 0 else binary("mul", const(c), power(t, k))
             for k, c in enumerate(coeffs) if c != 0]
    e = terms[0]
    for term in terms[1:]:
        e = binary("add", e, term)
    return e


def manufactured_forcing(n: int) -> Expr:
    """f(t) = x*^(2n) + x*'' + x*^3, built by symbolic differentiation of x*."""
    x = _poly_expr(manufactured_solution(n))
    d2 = differentiate(differentiate(x, "t"), "t")
    d2n = x
    for _ in range(2 * n):
        d2n = differentiate(d2n, "t")
    return binary("add", binary("add", d2n, d2), power(x, 3))


def example36(n: int = 1, degree=12, panels=32, nodes=5):
    """Variational form of x^(2n) + x'' + x^3 = f on (0, 1) with a manufactured f.

    n = 1 uses the Dirichlet conditions x(0) = x(1) = 0 only. For n >= 2 the
    derivatives up to n - 1 are clamped to zero as well, so that the
    manufactured x* is a critical point without natural boundary conditions.
    Returns (problem, exact solution coefficients in t).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    clamp = {0: 0.0} if n == 1 else {k: 0.0 for k in range(n)}
    spec = BoundarySpec(0.0, 1.0, n, dict(clamp), dict(clamp))
    potential = AntiderivativeTerm(manufactured_forcing(n), sign=-1.0)
    problem = Problem.build(example36_lagrangian(n), spec, degree, panels, nodes, potential=potential)
    return problem, manufactured_solution(n)
