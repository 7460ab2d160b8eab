import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dphase.exponents import sample_exponents
from dphase.grid import build_grid
from dphase.modular import (
    BracketError,
    check_modular_norm_relations,
    holder_pairing,
    luxemburg_norm,
    modular,
    modular_H,
    modular_h,
    samples_for,
)
from dphase.testfunctions import random_function


@pytest.fixture(scope="module")
def unit_square():
    return build_grid(2, [(0, 1)], 33)


@pytest.fixture(scope="module")
def unit_cube():
    return build_grid(3, [(0, 1)], 9)


def test_constant_one_unit_measure(unit_square):
    g = unit_square
    assert abs(modular_h((g, np.ones(g.shape)), np.full(g.shape, 1.7)) - 1.0) <= 1e-12


def test_constant_two_square_exponent(unit_square):
    g = unit_square
    assert abs(modular_h((g, np.full(g.shape, 2.0)), 2.0) - 4.0) <= 1e-12


def test_cubic_moment_oracle(unit_square):
    g = unit_square
    # on 33 nodes the quadrature is 2.4e-4 off the integral; compare with the discrete sum
    val = modular_h((g, g.coords[0]), 3.0)
    x = g.axes[0]
    w = np.full(x.size, x[1] - x[0])
    w[[0, -1]] *= 0.5
    assert abs(val - math.fsum(w * x**3)) <= 1e-12
    # composite trapezoid error for x^3 is exactly h^2 / 4
    assert abs(val - 0.25 - 0.25 * (x[1] - x[0]) ** 2) <= 1e-15


@pytest.mark.slow
def test_cubic_moment_to_1e8():
    # h^2 / 4 <= 1e-8 needs h <= 2e-4; 6001 nodes per axis gives 6.9e-9
    g = build_grid(2, [(0, 1)], 6001)
    assert abs(modular_h((g, g.coords[0]), 3.0) - 0.25) <= 1e-8


def test_cubic_moment_converges_to_quarter():
    errs = []
    for n in (33, 65, 129):
        g = build_grid(2, [(0, 1)], n)
        errs.append(abs(modular_h((g, g.coords[0]), 3.0) - 0.25))
    assert errs[-1] < errs[0] / 15
    assert errs[-1] <= 5e-5


def test_two_phase_at_one(unit_cube):
    e = sample_exponents(unit_cube, "1.5", "1.8", "1", "2.2")
    assert abs(modular_H((unit_cube, np.ones(unit_cube.shape)), e) - 2.0) <= 1e-10


def test_zero_mu_reduces_to_plain(unit_cube, rng):
    e = sample_exponents(unit_cube, "1.5", "1.8", "0", "2.2")
    u = random_function(unit_cube, rng)
    assert modular_H(u, e) == pytest.approx(modular_h(u, e.p_vals), rel=1e-14)


def test_zero_function():
    g = build_grid(3, [(-1, 1)], 7)
    e = sample_exponents(g, "1.5", "1.8", "1", "2.2")
    z = g.function(np.zeros(g.shape))
    for kind in ("musielak_H", "gradient_H"):
        assert luxemburg_norm(z, kind, e) == 0.0
        assert modular(z, kind, e) == 0.0
    assert luxemburg_norm(z, "plain_h", h=e.p_vals) == 0.0


def test_norm_two_modular_window():
    g = build_grid(3, [(-1, 1)], 9)
    e = sample_exponents(g, "1.5", "1.8", "1", "2.2")
    u = random_function(g, np.random.default_rng(3))
    n = luxemburg_norm(u, "musielak_H", e)
    v = g.function(u.values * (2.0 / n))
    assert luxemburg_norm(v, "musielak_H", e) == pytest.approx(2.0, rel=1e-12)
    rho = modular_H(v, e)
    assert 2**1.5 - 1e-10 <= rho <= 2**1.8 + 1e-10


def test_unknown_kind(small_grid, small_exponents):
    with pytest.raises(ValueError):
        modular(small_grid.function(np.zeros(small_grid.shape)), "nope", small_exponents)


def test_overflow_scale_raises(small_grid, small_exponents):
    u = small_grid.function(np.where(small_grid.interior, 1e300, 0.0))
    with pytest.raises(BracketError):
        luxemburg_norm(u, "gradient_H", small_exponents)


def test_convergence_analogue(small_grid, small_exponents):
    e = small_exponents
    u = random_function(small_grid, np.random.default_rng(11))
    bump = random_function(small_grid, np.random.default_rng(12))
    gaps, dists = [], []
    for k in range(1, 30):
        un = small_grid.function(u.values + 2.0**-k * bump.values)
        dists.append(modular_H((small_grid, un.values - u.values), e))
        gaps.append(abs(modular_H(un, e) - modular_H(u, e)))
    # the gap is not monotone: the linear term and the |delta|^p terms at zeros of u compete
    assert dists[-1] < 1e-12 and max(gaps[20:]) < 1e-8 * gaps[0] and gaps[-1] < 1e-11


amps = st.floats(-3.0, 3.0)
seeds = st.integers(0, 2**32 - 1)


@given(seeds, amps)
def test_relations_hold(small_grid, small_exponents, seed, la):
    rng = np.random.default_rng(seed)
    u = random_function(small_grid, rng, log_amplitude=(la, la))
    bad = [r for r in check_modular_norm_relations(u, small_exponents, tol=1e-8) if not r.passed]
    assert not bad, [r.line() for r in bad]


@given(seeds, amps, st.sampled_from([0.5, 3.0, -2.0]))
def test_norm_homogeneous(small_grid, small_exponents, seed, la, c):
    u = random_function(small_grid, np.random.default_rng(seed), log_amplitude=(la, la))
    for kind in ("musielak_H", "gradient_H"):
        n = luxemburg_norm(u, kind, small_exponents)
        nc = luxemburg_norm(small_grid.function(c * u.values), kind, small_exponents)
        assert abs(nc - abs(c) * n) <= 1e-8 * max(1.0, abs(c) * n)


@given(seeds, amps)
def test_luxemburg_unit_modular(small_grid, small_exponents, seed, la):
    u = random_function(small_grid, np.random.default_rng(seed), log_amplitude=(la, la))
    for kind in ("musielak_H", "gradient_H"):
        s = samples_for(u, kind, small_exponents)
        assert abs(s.value(s.norm()) - 1.0) <= 1e-10
    s = samples_for(u, "plain_h", h=small_exponents.q_vals)
    assert abs(s.value(s.norm()) - 1.0) <= 1e-10


@given(seeds, seeds, st.floats(1.2, 4.0))
def test_holder(small_grid, s1, s2, h):
    u = random_function(small_grid, np.random.default_rng(s1), log_amplitude=(-2, 2))
    v = random_function(small_grid, np.random.default_rng(s2), log_amplitude=(-2, 2))
    hv = h + 0.3 * np.sin(small_grid.coords[0])
    lhs, rhs = holder_pairing(u, v, hv)
    assert lhs <= rhs * (1 + 1e-12)


@given(seeds)
def test_modular_monotone_in_scale(small_grid, small_exponents, seed):
    s = samples_for(random_function(small_grid, np.random.default_rng(seed)), "musielak_H", small_exponents)
    vals = [s.value(2.0**k) for k in range(-5, 6)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
