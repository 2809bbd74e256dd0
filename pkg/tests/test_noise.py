import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svilab.grid import DIRICHLET, PERIODIC, Grid, GridFunction
from svilab.noise import (
    ALPHA_MAX,
    BumpProfile,
    Envelope,
    ModeSpec,
    NormalNoiseSpec,
    PolynomialProfile,
    SineProfile,
    TraceClassError,
    VerticalNoiseSpec,
    WienerSampler,
    apply_normal,
    apply_vertical,
    check_trace_class,
    geometric_family,
    mu_k,
    profile_from_dict,
    sample_increments,
    standard_normals,
)

GEOMETRIC_SUM = 1.0 / 3.0 + 20.0 * math.pi**2 / 27.0


# mu_k and trace class


def test_mu_k_zero_profile():
    assert mu_k(ModeSpec("multiplicative", PolynomialProfile((0.0,)))) == 0.0


@pytest.mark.parametrize("k", [1, 2, 5, 10])
def test_mu_k_geometric_closed_form(k):
    m = ModeSpec("multiplicative", SineProfile(k, 2.0**-k))
    assert mu_k(m) == pytest.approx(4.0**-k * (1 + (k * math.pi) ** 2), rel=1e-2)


def test_mu_k_additive_has_no_r_term():
    m = ModeSpec("additive", SineProfile(1))
    # only the x-derivative term survives, sup |pi cos| ^ 2 at r = 0
    assert mu_k(m) == pytest.approx(math.pi**2, rel=1e-6)
    assert mu_k(m, analytic_r=False, r_range=(1.0, 2.0)) == pytest.approx(math.pi**2 / 4, rel=1e-6)


def test_mu_k_sampled_r_range_is_below_analytic():
    m = ModeSpec("multiplicative", SineProfile(2, 0.5))
    assert mu_k(m, analytic_r=False) < mu_k(m)
    with pytest.raises(ValueError):
        mu_k(m, x_samples=[])


def test_trace_class_empty_and_geometric():
    assert check_trace_class(VerticalNoiseSpec()) == 0.0
    assert check_trace_class(geometric_family(20)) == pytest.approx(GEOMETRIC_SUM, abs=1e-6)


def test_trace_class_partial_sums_nondecreasing():
    sums = [check_trace_class(geometric_family(K)) for K in range(0, 12)]
    assert all(b >= a for a, b in zip(sums, sums[1:]))


def test_harmonic_family_rejected():
    modes = tuple(ModeSpec("multiplicative", SineProfile(1, 1 / math.sqrt(k))) for k in range(1, 6))
    with pytest.raises(TraceClassError):
        check_trace_class(VerticalNoiseSpec(modes, Envelope("power", 1.0)))


def test_envelope_violation_rejected():
    spec = VerticalNoiseSpec(geometric_family(3).modes, Envelope("geometric", 0.1, 1.0))
    with pytest.raises(TraceClassError):
        check_trace_class(spec)


def test_envelope_kinds():
    assert Envelope("geometric", 0.5).summable
    assert not Envelope("geometric", 1.0).summable
    assert Envelope("power", 2.0).summable
    with pytest.raises(ValueError):
        Envelope("weird", 1.0).summable


# profiles and modes


def test_additive_profile_must_vanish_at_boundary():
    with pytest.raises(ValueError):
        ModeSpec("additive", PolynomialProfile((1.0,)))
    with pytest.raises(ValueError):
        ModeSpec("quadratic", SineProfile(1))
    ModeSpec("additive", BumpProfile(0.5, 0.25))
    ModeSpec("additive", PolynomialProfile((0.0, 1.0, -1.0)))


@pytest.mark.parametrize(
    "profile", [SineProfile(3, 0.7), PolynomialProfile((0.0, 1.0, -1.0)), BumpProfile(0.4, 0.3, 2.0)], ids=repr
)
def test_profile_derivatives_and_round_trip(profile):
    x = np.linspace(0.05, 0.95, 37)
    h = 1e-6
    fd = (profile(x + h) - profile(x - h)) / (2 * h)
    np.testing.assert_allclose(profile.derivative(x), fd, rtol=1e-6, atol=1e-6)
    assert profile_from_dict(profile.to_dict()) == profile
    m = ModeSpec("multiplicative", profile, 0.5)
    assert ModeSpec.from_dict(m.to_dict()) == m


def test_unknown_profile():
    with pytest.raises(ValueError):
        profile_from_dict({"type": "cosine"})


def test_spec_round_trip():
    s = geometric_family(4, "additive")
    assert VerticalNoiseSpec.from_dict(s.to_dict()) == s


# apply_vertical / apply_normal


def test_multiplicative_noise_vanishes_at_zero():
    v = Grid(DIRICHLET, 20).zeros()
    out = apply_vertical(geometric_family(5), v, np.arange(1.0, 6.0))
    assert np.all(out.values == 0)


def test_single_additive_mode():
    g = Grid(DIRICHLET, 31)
    spec = VerticalNoiseSpec((ModeSpec("additive", SineProfile(1)),))
    out = apply_vertical(spec, g.zeros(), np.array([0.3]))
    np.testing.assert_allclose(out.values, 0.3 * np.sin(np.pi * g.x), atol=1e-15)


def test_apply_vertical_brute_force(rng):
    g = Grid(DIRICHLET, 40)
    spec = VerticalNoiseSpec(
        (ModeSpec("additive", BumpProfile(0.3, 0.2), 0.8), ModeSpec("multiplicative", SineProfile(2), 1.5))
    )
    v = GridFunction(g, rng.normal(size=40))
    db = rng.normal(size=2)
    expected = np.zeros(40)
    for i, (xi, vi) in enumerate(zip(g.x, v.values)):
        for m, b in zip(spec.modes, db):
            expected[i] += float(m(np.array([xi]), vi)[0]) * b
    np.testing.assert_allclose(apply_vertical(spec, v, db).values, expected, rtol=1e-14, atol=1e-14)
    with pytest.raises(ValueError):
        apply_vertical(spec, v, np.ones(3))


def test_normal_noise_examples():
    g = Grid(PERIODIC, 16)
    s = NormalNoiseSpec(1.2)
    np.testing.assert_allclose(apply_normal(s, g.sample(lambda x: 3 + 0 * x), 0.5).values, 0.6)
    assert np.all(apply_normal(NormalNoiseSpec(0.0), g.sample(np.sin), 0.5).values == 0)
    ramp = apply_normal(s, g.sample(lambda x: x), 0.5).values
    np.testing.assert_allclose(ramp[1:-1], 1.2 * math.sqrt(2) * 0.5, rtol=1e-12)
    with pytest.raises(ValueError):
        apply_normal(s, Grid(DIRICHLET, 16).zeros(), 0.1)


def test_alpha_range():
    NormalNoiseSpec(0.0)
    NormalNoiseSpec(ALPHA_MAX)
    for a in (-0.1, 1.5):
        with pytest.raises(ValueError, match="alpha out of range"):
            NormalNoiseSpec(a)


@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0, ALPHA_MAX), db=st.floats(-3, 3))
def test_normal_noise_lipschitz(seed, alpha, db):
    rng = np.random.default_rng(seed)
    g = Grid(PERIODIC, 32)
    v = GridFunction(g, rng.normal(size=32) * rng.uniform(0.01, 10))
    w = GridFunction(g, rng.normal(size=32))
    s = NormalNoiseSpec(alpha)
    d = apply_normal(s, v, db).values - apply_normal(s, w, db).values
    lhs = g.h * np.sum(d * d)
    dg = g.node_grad(v.values) - g.node_grad(w.values)
    rhs = alpha**2 * db**2 * g.h * np.sum(dg * dg)
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0, ALPHA_MAX))
def test_normal_noise_growth_identity(seed, alpha):
    rng = np.random.default_rng(seed)
    g = Grid(PERIODIC, 24)
    v = GridFunction(g, rng.normal(size=24))
    b = apply_normal(NormalNoiseSpec(alpha), v, 1.0).values
    a = g.node_grad(v.values)
    assert g.h * np.sum(b * b) == pytest.approx(alpha**2 * g.h * np.sum(1 + a * a), rel=1e-13, abs=1e-300)


def test_vertical_noise_linear_growth(rng):
    g = Grid(DIRICHLET, 64)
    spec = geometric_family(6)
    total = check_trace_class(spec)
    for _ in range(20):
        v = GridFunction(g, rng.normal(size=64) * 5)
        for k in range(spec.K):
            e = np.zeros(spec.K)
            e[k] = 1.0
            b = apply_vertical(spec, v, e).values
            assert g.h * np.sum(b * b) <= total * (1 + g.h * np.sum(v.values**2))


# random numbers


def test_increments_are_deterministic():
    s = WienerSampler(42, 3)
    assert np.array_equal(s.increments(5, 0.01, 7), sample_increments(s, 5, 0.01, 7))
    assert not np.array_equal(s.increments(5, 0.01, 7), s.increments(5, 0.01, 8))
    assert not np.array_equal(s.increments(5, 0.01, 7), WienerSampler(42, 4).increments(5, 0.01, 7))
    assert not np.array_equal(s.increments(5, 0.01, 7), WienerSampler(43, 3).increments(5, 0.01, 7))
    with pytest.raises(ValueError):
        s.increments(5, 0.0, 1)


def test_increments_scale_with_dt():
    s = WienerSampler(1, 0)
    np.testing.assert_allclose(s.increments(4, 0.25, 3), 0.5 * s.increments(4, 1.0, 3))


def test_increment_moments():
    z = standard_normals(2024, 0, np.arange(10**6), 0)
    assert abs(z.mean()) < 4 / math.sqrt(1e6)
    assert z.var() == pytest.approx(1.0, rel=0.01)
    assert abs(np.mean(z**3)) < 0.02
    assert np.mean(z**4) == pytest.approx(3.0, rel=0.03)


def test_streams_are_uncorrelated():
    steps = np.arange(10**5)
    a = standard_normals(9, 0, steps, 0)
    b = standard_normals(9, 1, steps, 0)
    c = standard_normals(9, 0, steps, 1)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.01


def test_standard_normals_broadcast_and_large_seed():
    z = standard_normals(2**64 - 1, np.arange(3)[:, None], 5, np.arange(4)[None, :])
    assert z.shape == (3, 4) and np.all(np.isfinite(z))
    assert z[1, 2] == standard_normals(2**64 - 1, 1, 5, 2)
