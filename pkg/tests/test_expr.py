import math
import threading

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from fuzz import expr_trees, points
from varreg.errors import (DomainError, ExponentError, NonSmoothError, ParseError,
                           UnboundVariableError, UnknownIdentifierError)
from varreg.expr import (Binary, Const, Lagrangian, Pow, Var, differentiate, evaluate,
                         free_variables, parse, size, to_text)


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * (1 + abs(b))


class TestParse:
    def test_half_square(self):
        e = parse("y1^2 / 2")
        assert e == Binary("div", Pow(Var("y1"), 2), Const(2.0))
        assert evaluate(e, {"y1": 3.0}) == 4.5

    def test_example_integrand(self):
        e = parse("1/2*y2^2 - 1/2*y1^2 + 1/4*y0^4")
        assert free_variables(e) == {"y0", "y1", "y2"}
        val = evaluate(e, {"y0": 2.0, "y1": 3.0, "y2": 1.0})
        assert val == pytest.approx(0.5 - 4.5 + 4.0)

    def test_dangling_operator_offset(self):
        with pytest.raises(ParseError) as info:
            parse("y3 +")
        assert info.value.offset == 3

    @pytest.mark.parametrize("text", ["y33", "x + 1", "foo(t)", "y01"])
    def test_unknown_identifier(self, text):
        with pytest.raises(UnknownIdentifierError):
            parse(text)

    @pytest.mark.parametrize("text", ["y1^2.5", "y1^y2", "t^(1/2)"])
    def test_non_integer_exponent(self, text):
        with pytest.raises(ExponentError):
            parse(text)

    @pytest.mark.parametrize("text", ["", "(", "t)", "sin t", "2 * * t", "t 3"])
    def test_malformed(self, text):
        with pytest.raises(ParseError):
            parse(text)

    def test_precedence(self):
        assert evaluate(parse("-t^2"), {"t": 3.0}) == -9.0
        assert evaluate(parse("2*t^3/4 - 1"), {"t": 2.0}) == 3.0
        assert evaluate(parse("2^-1"), {}) == 0.5
        assert evaluate(parse("t - 1 - 1"), {"t": 0.0}) == -2.0

    def test_constant_folding(self):
        assert parse("1/2 + 1/4") == Const(0.75)


class TestEvaluate:
    def test_abs(self):
        assert evaluate(parse("abs(t - 0.5)"), {"t": 0.25}) == 0.25

    def test_log_domain(self):
        with pytest.raises(DomainError) as info:
            evaluate(parse("log(y0)"), {"y0": -1.0})
        assert "log" in str(info.value)

    @pytest.mark.parametrize("text,env", [("sqrt(y0)", {"y0": -1.0}), ("1/t", {"t": 0.0}),
                                          ("t^(-2)", {"t": 0.0})])
    def test_other_domain_errors(self, text, env):
        with pytest.raises(DomainError):
            evaluate(parse(text), env)

    def test_domain_error_index(self):
        with pytest.raises(DomainError) as info:
            evaluate(parse("log(t)"), {"t": np.array([1.0, 2.0, 0.0, -1.0])})
        assert info.value.index == 2

    def test_unbound(self):
        with pytest.raises(UnboundVariableError):
            evaluate(parse("y0 + y1"), {"y0": 1.0})

    def test_array_matches_scalar(self):
        e = parse("sin(t)*y0 + exp(y1)/(1 + t^2)")
        t = np.linspace(0, 1, 7)
        y0 = np.cos(t)
        y1 = t ** 2
        arr = evaluate(e, {"t": t, "y0": y0, "y1": y1})
        for i in range(7):
            assert arr[i] == evaluate(e, {"t": t[i], "y0": y0[i], "y1": y1[i]})

    @given(expr_trees(), points)
    def test_deterministic(self, e, env):
        a = evaluate(e, env)
        b = evaluate(e, env)
        assert (math.isnan(a) and math.isnan(b)) or a == b


class TestDifferentiate:
    def test_power_rule(self):
        d = differentiate(parse("y1^2/2"), "y1")
        assert evaluate(d, {"y1": 1.7}) == pytest.approx(1.7, abs=1e-15)
        d = differentiate(parse("y0^4/4"), "y0")
        assert evaluate(d, {"y0": 1.3}) == pytest.approx(1.3 ** 3, rel=1e-15)

    def test_product_rule(self):
        d = differentiate(parse("sin(t)*y0"), "t")
        assert to_text(d) == to_text(parse("cos(t)*y0"))

    def test_abs_refused(self):
        with pytest.raises(NonSmoothError):
            differentiate(parse("abs(y1)"), "y1")
        assert evaluate(differentiate(parse("abs(t) + y1"), "y1"), {}) == 1.0

    @given(expr_trees(), points, st.sampled_from(("t", "y0", "y1", "y2")))
    def test_matches_central_difference(self, e, env, var):
        d = differentiate(e, var)
        h = 1e-5
        hi = evaluate(e, {**env, var: env[var] + h})
        lo = evaluate(e, {**env, var: env[var] - h})
        exact = evaluate(d, env)
        assume(all(math.isfinite(x) and abs(x) < 1e6 for x in (hi, lo, exact)))
        fd = (hi - lo) / (2 * h)
        # the h^2 truncation term is bounded via the tree size
        assert abs(fd - exact) <= 1e-4 * (1 + abs(exact)) * size(e)

    @given(expr_trees())
    def test_derivative_of_absent_variable_is_zero(self, e):
        assume("y2" not in free_variables(e))
        assert differentiate(e, "y2") == Const(0.0)


class TestRoundTrip:
    @given(expr_trees())
    def test_parse_to_text(self, e):
        once = parse(to_text(e))
        assert parse(to_text(once)) == once

    @given(expr_trees(), points)
    def test_value_preserved(self, e, env):
        a = evaluate(e, env)
        b = evaluate(parse(to_text(e)), env)
        assert (math.isnan(a) and math.isnan(b)) or a == b or abs(a - b) <= 1e-12 * (1 + abs(a))


class TestLagrangian:
    def test_order_check(self):
        with pytest.raises(ValueError):
            Lagrangian(1, "y2^2")

    def test_non_smooth_flag(self):
        lag = Lagrangian(1, "abs(y1)")
        assert not lag.smooth
        with pytest.raises(NonSmoothError):
            lag.partials(0.3, [0.0, 1.0])

    def test_partials_shape(self):
        lag = Lagrangian(2, "y2^2/2 + t*y0*y1")
        t = np.linspace(0, 1, 5)
        jet = np.stack([t, 2 * t, 3 * t])
        g = lag.partials(t, jet)
        assert g.shape == (3, 5)
        np.testing.assert_allclose(g[0], t * 2 * t)
        np.testing.assert_allclose(g[2], 3 * t)
        H = lag.second_partials(t, jet)
        assert H.shape == (3, 3, 5)
        np.testing.assert_allclose(H[0, 1], t)
        np.testing.assert_allclose(H[2, 2], 1.0)

    def test_second_partials_thread_safe(self):
        lag = Lagrangian(3, "sin(y0*y1)*y2^2 + exp(y3)*t")
        out = []
        threads = [threading.Thread(target=lambda: out.append(lag.second)) for _ in range(8)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        assert all(x is out[0] for x in out)
