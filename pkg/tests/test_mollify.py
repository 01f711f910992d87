import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from varreg.errors import BoxError
from varreg.mollify import (CascadeOptions, MollifiedFunction, _discrete_weights, cascade,
                            cauchy_check, corrupt_level, kernel, kernel_mass, mollify_value,
                            sup_distance_to_source)

WIDTHS = [0.25, 0.125, 0.0625, 0.03125]


class TestKernel:
    @pytest.mark.parametrize("width", WIDTHS + [1.0, 1e-3])
    def test_unit_mass(self, width):
        assert abs(kernel_mass(width) - 1) <= 1e-10

    def test_support(self):
        assert kernel(np.array([0.3, -0.3, 0.31]), 0.3).tolist() == [0.0, 0.0, 0.0]

    @pytest.mark.parametrize("nodes", [8, 16, 24, 32])
    def test_discrete_moments(self, nodes):
        r, w0, w1, w2 = _discrete_weights(nodes)
        assert w0.sum() == pytest.approx(1, abs=1e-15)
        assert -(w1 * r).sum() == pytest.approx(1, abs=1e-14)
        assert w1.sum() == pytest.approx(0, abs=1e-14)
        assert (w2 * r ** 2).sum() / 2 == pytest.approx(1, abs=1e-14)
        assert abs(w2.sum()) <= 1e-13 and abs((w2 * r).sum()) <= 1e-13


class TestMollifyValue:
    def test_affine_in_x(self):
        mf = MollifiedFunction("y0", 0.1)
        assert abs(mollify_value(mf, 1.0, 0.3) - 0.3) <= 1e-10
        assert mollify_value(mf, 0.5, 0.3, "dx") == pytest.approx(1.0, abs=1e-12)
        assert abs(mollify_value(mf, 0.5, 0.3, "dxx")) <= 1e-12

    @given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 0.8), st.floats(-1, 1))
    def test_affine_exact_interior(self, c0, ct, cx, t, x):
        mf = MollifiedFunction(f"{c0} + {ct}*t + {cx}*y0", 0.1)
        assert abs(mf(t, x) - (c0 + ct * t + cx * x)) <= 1e-12 * (1 + abs(c0) + abs(ct) + abs(cx))

    def test_kink_value(self):
        eps = 0.1
        mf = MollifiedFunction("abs(t - 0.5)", eps)
        r, w0, _, _ = _discrete_weights(24)
        assert mf(0.5, 0.0) == pytest.approx(eps * np.sum(w0 * np.abs(r)), abs=1e-15)
        continuous = eps * integrate.quad(lambda s: abs(s) * float(kernel(np.array(s), 1.0)), -1, 1,
                                          points=[0])[0]
        assert mf(0.5, 0.0) > 0
        assert mf(0.5, 0.0) == pytest.approx(continuous, rel=5e-3)

    @pytest.mark.parametrize("eps", WIDTHS)
    def test_lipschitz_bound(self, eps):
        mf = MollifiedFunction("abs(t - 0.5)", eps)
        assert sup_distance_to_source(mf, np.linspace(0, 1, 1025)) <= eps

    def test_second_order_consistency(self):
        t = np.linspace(0.3, 0.7, 41)
        exact = np.sin(3 * t) + 0.16 * t
        errs = [np.max(np.abs(MollifiedFunction("sin(3*t) + y0^2*t", e)(t, 0.4) - exact))
                for e in (0.1, 0.05)]
        assert 3 <= errs[0] / errs[1] <= 5

    def test_partials_match_finite_differences(self):
        mf = MollifiedFunction("sin(3*t)*y0 + cos(y0)*t^2", 0.05)
        t, x, h = 0.4, 0.3, 1e-4
        dt = (mf(t + h, x) - mf(t - h, x)) / (2 * h)
        dx = (mf(t, x + h) - mf(t, x - h)) / (2 * h)
        dxx = (mf(t, x + h) - 2 * mf(t, x) + mf(t, x - h)) / h ** 2
        assert mf(t, x, "dt") == pytest.approx(dt, rel=1e-6)
        assert mf(t, x, "dx") == pytest.approx(dx, rel=1e-6)
        assert mf(t, x, "dxx") == pytest.approx(dxx, rel=1e-4)

    def test_t_only_has_no_x_partials(self):
        mf = MollifiedFunction("abs(t - 0.5)", 0.1)
        assert mf(np.linspace(0, 1, 5), 0.0, "dx").tolist() == [0.0] * 5
        assert mf(0.3, 0.0, "dxx") == 0.0

    def test_array_broadcast(self):
        mf = MollifiedFunction("t*y0", 0.05)
        t = np.linspace(0.1, 0.9, 4)[:, None]
        x = np.linspace(-1, 1, 3)[None, :]
        assert mf(t, x).shape == (4, 3)
        assert mf(t, x)[2, 1] == pytest.approx(mf(float(t[2, 0]), float(x[0, 1])), abs=1e-15)

    def test_box(self):
        mf = MollifiedFunction("y0", 0.1, box=(-1, 1))
        mf(0.5, 1.05)
        with pytest.raises(BoxError):
            mf(0.5, 1.2)
        with pytest.raises(BoxError):
            mf(1.2, 0.0)
        with pytest.raises(BoxError):
            MollifiedFunction("y0", 0.1, box=(1, -1))

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            MollifiedFunction("y1", 0.1)
        with pytest.raises(ValueError):
            MollifiedFunction("t", 0.0)
        with pytest.raises(ValueError):
            mollify_value(MollifiedFunction("t", 0.1), 0.5, 0.0, "dy")


class TestCascade:
    def test_monotone_approach(self):
        rep = cascade("abs(t - 0.5)", WIDTHS)
        d = rep.source_distance
        assert all(b < a for a, b in zip(d, d[1:]))
        assert rep.mode == "t-only" and rep.lipschitz == 0.0

    def test_constant_source_identity(self):
        rep = cascade("2", WIDTHS)
        assert cauchy_check(rep) == []
        assert len(rep.checks) == 6 and all(rep.checks.values())
        assert all(inc <= rep.slack for inc in rep.increments)
        # second derivatives of the monomial basis carry ~1e-7 roundoff at degree 12
        assert np.max(np.abs(rep.levels[-1](rep.grid, 2) - 2)) <= 1e-6

    def test_single_width(self):
        rep = cascade("abs(t - 0.5)", [0.1])
        assert rep.pairs == [] and cauchy_check(rep) == []

    @pytest.mark.parametrize("level", [0, 2])
    def test_corruption_detected(self, level):
        rep = cascade("2", WIDTHS)
        corrupt_level(rep, level, lambda t: 0.1 * t * (1 - t))
        bad = cauchy_check(rep)
        assert bad and all(level in pair for pair in bad)
        assert len(bad) == 3

    def test_general_mode(self):
        rep = cascade("y0 + 1", [0.2, 0.1, 0.05])
        assert rep.mode == "general"
        assert rep.lipschitz == pytest.approx(1.0)
        assert cauchy_check(rep) == []

    def test_failed_level_recorded(self):
        opts = CascadeOptions(box=(-0.01, 0.01))
        rep = cascade("y0 + 50", [0.2, 0.1], options=opts)
        assert rep.failed == [0, 1]
        assert rep.checks == {}

    def test_norm_grid_size(self):
        rep = cascade("1", [0.2, 0.1])
        assert rep.grid.size == 1025

    def test_bad_widths(self):
        with pytest.raises(ValueError):
            cascade("t", [0.1, 0.2])

    def test_slack(self):
        opts = CascadeOptions()
        assert opts.slack == pytest.approx(2 * (100 * 1e-10 + (1 / 1024) ** 2))
