import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svilab.flux import (
    FluxModel,
    UnsupportedModelError,
    eval_flux,
    eval_flux_derivative,
    eval_potential,
    linear,
    mean_curvature,
    minimal_surface,
    newtonian,
    numeric_recession,
    recession,
    scaled_mean_curvature,
    validate_growth,
)

ALL = [mean_curvature(), scaled_mean_curvature(0.5), minimal_surface(1.0), minimal_surface(0.01), newtonian(1.5), linear()]
LINEAR_GROWTH = [mean_curvature(), scaled_mean_curvature(0.5), minimal_surface(1.0), minimal_surface(0.01)]

reals = st.floats(-1e3, 1e3, allow_nan=False)


# frozen values


def test_mean_curvature_values():
    m = mean_curvature()
    assert eval_potential(m, 1.0) == pytest.approx(math.pi / 4 - 0.5 * math.log(2.0), abs=1e-15)
    assert eval_flux(m, 1.0) == pytest.approx(math.pi / 4, abs=1e-15)
    assert eval_flux_derivative(m, 1.0) == 0.5
    assert eval_potential(m, 0.0) == 0.0


def test_minimal_surface_values():
    m = minimal_surface(1.0)
    assert eval_potential(m, 1.0) == pytest.approx(math.sqrt(2.0) - 1.0, abs=1e-15)
    assert eval_flux(m, 1.0) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-15)
    assert eval_flux_derivative(m, 1.0) == pytest.approx(2.0**-1.5, abs=1e-15)


def test_minimal_surface_small_argument_is_accurate():
    # sqrt(eps + xi^2) - sqrt(eps) ~ xi^2 / (2 sqrt(eps)) without cancellation
    m = minimal_surface(1.0)
    assert eval_potential(m, 1e-9) == pytest.approx(5e-19, rel=1e-12)


def test_newtonian_and_linear_values():
    assert eval_potential(newtonian(1.5), 1.0) == pytest.approx((2.0**0.75 - 1.0) / 1.5, abs=1e-15)
    assert eval_potential(linear(), 3.0) == 4.5
    assert eval_flux(linear(), -2.0) == -2.0


def test_scalar_and_vector_return_types():
    m = mean_curvature()
    assert isinstance(m.potential(0.3), float)
    out = m.flux(np.array([0.0, 1.0]))
    assert isinstance(out, np.ndarray) and out.shape == (2,)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_arguments_rejected(bad):
    with pytest.raises(ValueError):
        mean_curvature().potential(bad)
    with pytest.raises(ValueError):
        mean_curvature().flux(np.array([0.0, bad]))


@pytest.mark.parametrize(
    "kw",
    [
        {"kind": "nope"},
        {"kind": "scaled_mean_curvature", "coef": 1.5},
        {"kind": "minimal_surface", "eps_reg": 0.0},
        {"kind": "newtonian", "p": 2.0},
        {"kind": "mean_curvature", "coef": -1.0},
    ],
)
def test_invalid_models(kw):
    with pytest.raises(ValueError):
        FluxModel(**kw)


@pytest.mark.parametrize("m", ALL, ids=lambda m: f"{m.kind}-{m.coef}-{m.eps_reg}")
def test_dict_round_trip(m):
    assert FluxModel.from_dict(m.to_dict()) == m


# recession


def test_recession_closed_forms():
    assert recession(mean_curvature(), 1.0) == pytest.approx(math.pi / 2)
    assert recession(minimal_surface(1.0), -2.0) == pytest.approx(2.0)
    assert recession(scaled_mean_curvature(0.5), 1.0) == pytest.approx(math.pi / 4)


@pytest.mark.parametrize("m", [newtonian(1.5), linear()])
def test_recession_requires_linear_growth(m):
    with pytest.raises(UnsupportedModelError):
        recession(m, 1.0)


def test_numeric_recession_matches_closed_form():
    m = minimal_surface(1.0)
    assert numeric_recession(m.potential, 1.0) == pytest.approx(recession(m, 1.0), abs=1e-9)


def test_numeric_recession_diverges_without_linear_growth():
    with pytest.raises(ArithmeticError):
        numeric_recession(linear().potential, 1.0, max_halvings=30)


@pytest.mark.parametrize("m", LINEAR_GROWTH, ids=lambda m: f"{m.kind}-{m.eps_reg}")
@given(xi=st.floats(-50, 50, allow_nan=False), t=st.floats(1e-3, 1.0))
def test_recession_quotient_monotone(m, xi, t):
    # t psi(xi / t) grows as t decreases and stays below the recession value
    a = t * m.potential(xi / t)
    b = (t / 2) * m.potential(2 * xi / t)
    assert a <= b * (1 + 1e-12) + 1e-12
    assert b <= recession(m, xi) * (1 + 1e-12) + 1e-12


# convexity and growth


@pytest.mark.parametrize("m", ALL, ids=lambda m: f"{m.kind}-{m.coef}-{m.eps_reg}")
@given(a=reals, b=reals)
def test_flux_monotone_and_potential_convex(m, a, b):
    fa, fb = m.flux(a), m.flux(b)
    assert (fa - fb) * (a - b) >= -1e-9 * (1 + abs(a) + abs(b))
    mid = m.potential(0.5 * (a + b))
    assert mid <= 0.5 * (m.potential(a) + m.potential(b)) + 1e-9 * (1 + abs(a) + abs(b))


@pytest.mark.parametrize("m", ALL, ids=lambda m: f"{m.kind}-{m.coef}-{m.eps_reg}")
@given(xi=reals)
def test_potential_nonnegative_and_flux_derivative_bounded(m, xi):
    assert m.potential(xi) >= 0.0
    assert 0.0 <= m.flux_derivative(xi) <= m.max_flux_derivative * (1 + 1e-12)


@pytest.mark.parametrize("m", LINEAR_GROWTH, ids=lambda m: f"{m.kind}-{m.eps_reg}")
@given(xi=reals)
def test_flux_bounded_by_recession_slope(m, xi):
    assert abs(m.flux(xi)) <= m.flux_bound


@given(xi=st.floats(-20, 20, allow_nan=False))
def test_flux_is_derivative_of_potential(xi):
    for m in ALL:
        h = 1e-6
        fd = (m.potential(xi + h) - m.potential(xi - h)) / (2 * h)
        assert fd == pytest.approx(m.flux(xi), rel=1e-6, abs=1e-8)
        fd2 = (m.flux(xi + h) - m.flux(xi - h)) / (2 * h)
        assert fd2 == pytest.approx(m.flux_derivative(xi), rel=1e-5, abs=1e-7)


def test_validate_growth_mean_curvature():
    rep = validate_growth(mean_curvature())
    assert rep.ok and rep.linear_growth
    assert rep.per_family == {"linear_growth": 0, "coercivity": 0, "hessian": 0}
    assert rep.fitted_C <= 2.0
    assert rep.fitted_c > 0
    assert rep.sample_range == (-100.0, 100.0)


def test_validate_growth_flags_newtonian():
    rep = validate_growth(newtonian(1.5))
    assert not rep.linear_growth
    assert rep.violations > 0


def test_validate_growth_counts_violations_of_declared_constants():
    tight = FluxModel("mean_curvature", growth_C=0.1)
    assert validate_growth(tight).violations > 0


def test_validate_growth_argument_checks():
    with pytest.raises(ValueError):
        validate_growth(mean_curvature(), range=(1.0, 1.0))
    with pytest.raises(ValueError):
        validate_growth(mean_curvature(), n_samples=1)
