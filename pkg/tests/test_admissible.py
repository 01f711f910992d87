import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from varreg.admissible import (BoundarySpec, Polynomial, Trajectory, build_basis, build_lift,
                               constraint_matrix, eval_trajectory, norms, project)
from varreg.errors import BasisError, BoundaryError


def full_order_data(seed, n, a=0.0, b=1.0):
    rng = np.random.default_rng(seed)
    u = rng.uniform(-2, 2, n + 1)
    w = rng.uniform(-2, 2, n + 1)
    while abs(w[0] - u[0]) < 0.1:
        w[0] = rng.uniform(-2, 2)
    return BoundarySpec(a, b, n, dict(enumerate(u)), dict(enumerate(w)))


def max_bc_error(poly, spec):
    errs = []
    for s0, k, v in spec.constraints():
        t = spec.a + s0 * spec.length
        errs.append(abs(poly(t, k) - v) / (1 + abs(v)))
    return max(errs, default=0.0)


class TestBoundarySpec:
    def test_invalid(self):
        with pytest.raises(BoundaryError):
            BoundarySpec(1.0, 0.0, 1)
        with pytest.raises(BoundaryError):
            BoundarySpec(0.0, 1.0, 1, {2: 0.0})
        with pytest.raises(BoundaryError):
            BoundarySpec(0.0, 1.0, 0)

    def test_full_order(self):
        assert BoundarySpec(0, 1, 1, {0: 0, 1: 0}, {0: 1, 1: 0}).full_order
        assert not BoundarySpec.dirichlet(0, 1, 1, 0, 1).full_order


class TestPolynomial:
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=7), st.floats(-3, 3), st.floats(0.1, 4))
    def test_power_basis_round_trip(self, c, a, h):
        p = Polynomial(c, a, a + h)
        q = Polynomial.from_power_basis(p.to_power_basis(), a, a + h)
        t = np.linspace(a, a + h, 9)
        np.testing.assert_allclose(q(t), p(t), atol=1e-8 * (1 + np.abs(p(t)).max()))

    def test_derivative_scaling(self):
        p = Polynomial.from_power_basis([0, 0, 1], 1.0, 3.0)  # t^2 on [1, 3]
        assert p(2.0, 1) == pytest.approx(4.0)
        assert p(2.0, 2) == pytest.approx(2.0)
        assert p(2.0, 3) == 0.0


class TestLift:
    def test_cubic_from_recursion(self):
        spec = BoundarySpec(0, 1, 1, {0: 0, 1: 0}, {0: 1, 1: 0})
        lift = build_lift(spec)
        np.testing.assert_allclose(lift.to_power_basis()[:4], [0, 0, 3, -2], atol=1e-12)
        assert np.all(np.abs(lift.to_power_basis()[4:]) <= 1e-12)

    def test_degenerate_zero_data(self):
        spec = BoundarySpec(0, 1, 1, {0: 0, 1: 0}, {0: 0, 1: 0})
        lift = build_lift(spec)
        assert np.all(np.abs(lift.coeffs) <= 1e-14)

    def test_line(self):
        spec = BoundarySpec.dirichlet(2.0, 5.0, 1, 0.0, 1.0)
        lift = build_lift(spec)
        t = np.linspace(2, 5, 11)
        np.testing.assert_allclose(lift(t), (t - 2) / 3, atol=1e-15)

    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_full_order_conditions(self, seed, n):
        spec = full_order_data(seed, n)
        lift = build_lift(spec)
        assert lift.degree <= 2 * n + 1
        assert max_bc_error(lift, spec) <= 1e-9

    @given(st.integers(0, 10_000), st.integers(1, 4), st.floats(-2, 2), st.floats(0.2, 3))
    def test_full_order_shifted_interval(self, seed, n, a, h):
        spec = full_order_data(seed, n, a, a + h)
        # t-derivatives of order k carry h^-k times the s-coefficient roundoff
        assert max_bc_error(build_lift(spec), spec) <= 1e-9 * max(1.0, h ** -n)

    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_partial_data_fallback(self, seed, n):
        rng = np.random.default_rng(seed)
        left = {k: float(rng.normal()) for k in rng.choice(n + 1, rng.integers(0, n + 2), replace=False)}
        right = {k: float(rng.normal()) for k in rng.choice(n + 1, rng.integers(0, n + 2), replace=False)}
        spec = BoundarySpec(0.0, 1.5, n, left, right)
        assert max_bc_error(build_lift(spec), spec) <= 1e-9


class TestBasis:
    def test_two_modes(self):
        spec = BoundarySpec.dirichlet(0, 1, 1, 0, 0)
        basis = build_basis(spec, 3)
        assert basis.size == 2
        for k in range(2):
            m = basis.mode(k)
            assert abs(m(0.0)) <= 1e-12 and abs(m(1.0)) <= 1e-12
        np.testing.assert_allclose(basis.modes @ basis.modes.T, np.eye(2), atol=1e-14)

    def test_no_modes(self):
        assert build_basis(BoundarySpec(0, 1, 1, {0: 0, 1: 0}, {0: 0, 1: 0}), 3).size == 0
        assert build_basis(BoundarySpec.dirichlet(0, 1, 1, 0, 0), 1).size == 0

    def test_degree_too_small(self):
        with pytest.raises(BasisError):
            build_basis(BoundarySpec(0, 1, 1, {0: 0, 1: 0}, {0: 0, 1: 0}), 2)

    @given(st.integers(0, 10_000), st.integers(1, 3), st.integers(8, 14))
    def test_modes_homogeneous_and_independent(self, seed, n, degree):
        rng = np.random.default_rng(seed)
        spec = BoundarySpec(-1.0, 2.0, n, {k: 0.0 for k in range(n)}, {k: 1.0 for k in range(n + 1)})
        basis = build_basis(spec, degree)
        A = constraint_matrix(spec, degree)
        assert np.max(np.abs(A @ basis.modes.T)) <= 1e-12
        assert basis.size == degree + 1 - len(spec.constraints())
        u = Trajectory(basis, rng.normal(size=basis.size))
        assert max_bc_error(u.poly, spec) <= 1e-10


class TestTrajectory:
    def setup_method(self):
        spec = BoundarySpec(0, 1, 1, {0: 0, 1: 0}, {0: 1, 1: 0})
        self.u = build_basis(spec, 6).zero()

    def test_eval(self):
        assert eval_trajectory(self.u, 0.5, 1) == pytest.approx(1.5)
        assert eval_trajectory(self.u, 0.0) == 0.0
        assert eval_trajectory(self.u, 0.3, 7) == 0.0

    def test_outside(self):
        with pytest.raises(ValueError):
            eval_trajectory(self.u, 1.5)

    def test_project_polynomial(self):
        spec = BoundarySpec.dirichlet(0, 2, 1, 0.0, 0.0)
        basis = build_basis(spec, 8)
        target = Polynomial.from_power_basis([0, 2, -1], 0, 2)  # t(2 - t)
        u = project(basis, target)
        t = np.linspace(0, 2, 21)
        np.testing.assert_allclose(u(t), t * (2 - t), atol=1e-13)
        v = project(basis, lambda t: np.sin(np.pi * t / 2))
        assert np.max(np.abs(v(t) - np.sin(np.pi * t / 2))) < 1e-6


class TestNorms:
    def test_linear(self):
        spec = BoundarySpec.dirichlet(0, 1, 1, 0, 1)
        sob, cn = norms(build_basis(spec, 4).zero(), 1)
        assert sob == pytest.approx(1 / math.sqrt(3) + 1, abs=1e-14)
        assert cn == pytest.approx(2.0, abs=1e-14)

    def test_zero(self):
        spec = BoundarySpec.dirichlet(0, 1, 2, 0, 0)
        assert norms(build_basis(spec, 4).zero(), 2) == (0.0, 0.0)

    @given(st.integers(0, 10_000), st.integers(1, 3), st.floats(0.1, 3))
    def test_embedding(self, seed, n, h):
        rng = np.random.default_rng(seed)
        spec = BoundarySpec(0.0, h, n)
        basis = build_basis(spec, 5)
        u = Trajectory(basis, rng.normal(size=basis.size))
        sob, cn = norms(u, n)
        assert sob <= math.sqrt(h) * cn + 1e-12
