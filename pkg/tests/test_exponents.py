import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dphase.exponents import (
    ExpressionError,
    critical_exponent,
    evaluate_expression,
    sample_exponents,
    validate_hypotheses,
)
from dphase.grid import build_grid


@pytest.mark.parametrize("p,n,want", [(1.5, 3, 3.0), (2.0, 3, 6.0), (3.0, 3, math.inf), (4.0, 3, math.inf)])
def test_critical_exponent(p, n, want):
    assert critical_exponent(p, n) == want


def test_critical_exponent_rejects_p_at_most_one():
    with pytest.raises(ValueError):
        critical_exponent(1.0, 3)


@pytest.fixture(scope="module")
def g3():
    return build_grid(3, [(-1, 1)], 9)


def test_constant_exponents_pass(g3):
    rep = validate_hypotheses(sample_exponents(g3, "1.5", "1.8", "1", "2.5"))
    assert rep.passed, rep.to_json()


def test_p_above_q_fails_h1(g3):
    rep = validate_hypotheses(sample_exponents(g3, "2.5", "2.0", "1", "2.8"))
    assert not rep.results["H1"]["passed"]
    assert "p(x) >= q(x)" in rep.results["H1"]["violation"]["detail"]


def test_negative_mu_node_reports_location(g3):
    rep = validate_hypotheses(sample_exponents(g3, "1.5", "1.8", "x1 - 0.9", "2.2"))
    assert rep.results["H1"]["passed"]
    v = rep.results["H2"]["violation"]
    assert not rep.results["H2"]["passed"]
    assert v["coords"][0] - 0.9 < 0
    assert v["node"] == list(np.unravel_index(v["flat_index"], g3.shape))


def test_q_at_critical_fails(g3):
    # p* = 3 for p = 1.5 in three dimensions
    rep = validate_hypotheses(sample_exponents(g3, "1.5", "3.0", "1", "3.5"))
    assert not rep.results["H1"]["passed"]


@pytest.mark.parametrize("beta", ["1.7", "1.8", "3.0", "3.2"])
def test_beta_window(g3, beta):
    rep = validate_hypotheses(sample_exponents(g3, "1.5", "1.8", "1", beta))
    assert not rep.results["beta0"]["passed"]


def test_default_beta_is_window_midpoint(g3):
    e = sample_exponents(g3, "1.5", "1.8", "1")
    assert e.beta_minus == pytest.approx((1.8 + 3.0) / 2, abs=1e-14)
    assert validate_hypotheses(e).passed


def test_two_dimensional_needs_p_below_two():
    g = build_grid(2, [(-1, 1)], 9)
    assert validate_hypotheses(sample_exponents(g, "1.5", "1.8", "1", "2.5")).passed
    assert not validate_hypotheses(sample_exponents(g, "2.1", "2.2", "1", "2.5")).results["H1"]["passed"]


def test_variable_exponent_expression(g3):
    e = sample_exponents(g3, "1.5 + 0.1*sin(pi*x1)", "1.8 + 0.05*x2", "1 + |x|", "2.2")
    np.testing.assert_allclose(e.p_vals, 1.5 + 0.1 * np.sin(np.pi * g3.coords[0]), rtol=0, atol=1e-15)
    assert 1.4 <= e.p_minus < 1.41
    assert e.q_plus == pytest.approx(1.85, abs=1e-12)
    np.testing.assert_allclose(e.mu_vals, 1 + g3.radius)
    assert validate_hypotheses(e).passed


@pytest.mark.parametrize("expr", ["", "1 +", "foo", "x4", "__import__('os')", "sin(x1, x2)", "1/0*x1", "[1]"])
def test_bad_expressions(g3, expr):
    with pytest.raises(ExpressionError):
        evaluate_expression(expr, g3.coords)


@given(st.floats(1.05, 2.9), st.floats(0.01, 0.5))
def test_critical_exceeds_p(p, gap):
    assert critical_exponent(p, 3) > p
    assert critical_exponent(p + gap, 3) > critical_exponent(p, 3) or p + gap >= 3
