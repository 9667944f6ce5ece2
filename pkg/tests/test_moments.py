import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urnlab.harness import enumerate_binomial
from urnlab.models import Explicit, Geometric, StretchedGeometric, Uniform, Zipf, parse_model
from urnlab.moments import (
    Certified,
    Setting,
    _binomial_pmf_summand,
    _poisson_pmf_summand,
    exact_binomial_variances,
    expected_coverage,
    expected_cumulative,
    expected_mass,
    expected_occupancy,
    karlin_asymptotics,
    moment_report,
    poissonization_gap,
    slow_variation_certificate,
    var_coverage_poisson,
    var_independent,
    var_missing_mass_poisson,
    variance_proxies,
)


def close(cert: Certified, oracle: float, rel: float = 1e-12) -> bool:
    return abs(cert.value - oracle) <= cert.error + rel * abs(oracle)


# Reference values from mpmath at 30-40 digits: direct summation of the first
# 20000 terms plus an Euler-Maclaurin tail (quad + f/2 - f'/12).
@pytest.mark.parametrize(
    "func,setting,r,oracle",
    [
        ("coverage", Setting.binomial(1000), None, 43.207400307045328),
        ("occupancy", Setting.binomial(1000), 1, 21.853700153444314),
        ("mass", Setting.binomial(1000), 0, 0.021842778764063274),
        ("coverage", Setting.poisson(10_000), None, 137.69765978853419),
        ("occupancy", Setting.poisson(10_000), 2, 17.274707473359992),
    ],
)
def test_zipf_moments_against_mpmath(func, setting, r, oracle):
    z = Zipf(2.0)
    if func == "coverage":
        got = expected_coverage(z, setting)
    elif func == "occupancy":
        got = expected_occupancy(z, setting, r)
    else:
        got = expected_mass(z, setting, r)
    assert got.error <= 1e-9 * max(1.0, abs(oracle)) * 10
    assert close(got, oracle)


def test_geometric_poisson_against_mpmath():
    g = Geometric(0.5)
    assert close(expected_occupancy(g, Setting.poisson(100), 1), 1.4426979548249903)
    assert close(var_coverage_poisson(g, 100), 1.0)


def test_uniform_two_poisson_variance():
    # k e^{-t/k}(1 - e^{-t/k}) at k = t = 2
    got = var_coverage_poisson(Uniform(2), 2.0).value
    assert got == pytest.approx(2 * math.exp(-1) * (1 - math.exp(-1)), rel=1e-14)
    assert round(got, 6) == 0.465088


def test_birthday_values():
    k, t = 10_000, 100.0
    ek = expected_coverage(Uniform(k), Setting.poisson(t)).value
    var = var_coverage_poisson(Uniform(k), t).value
    assert ek == pytest.approx(k * -math.expm1(-t / k), rel=1e-13)
    assert var == pytest.approx(98.511604424127514, rel=1e-12)
    assert 99.5 <= ek <= 99.5 + 1 / 600


SMALL = [(0.6, 0.4), (0.5, 0.3, 0.2), (0.4, 0.3, 0.2, 0.1), (0.97, 0.01, 0.01, 0.01), (0.25,) * 4]


@pytest.mark.parametrize("probs", SMALL)
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_binomial_moments_match_enumeration(probs, n):
    model = Explicit(probs)
    law = enumerate_binomial(model.table, n)
    s = Setting.binomial(n)
    assert expected_coverage(model, s).value == pytest.approx(law.mean(law.K), rel=1e-12)
    for r in range(1, n + 1):
        assert expected_occupancy(model, s, r).value == pytest.approx(law.mean(law.K_r(r)), rel=1e-12, abs=1e-15)
        assert expected_cumulative(model, s, r).value == pytest.approx(law.mean(law.Kbar(r)), rel=1e-12, abs=1e-15)
    for r in range(0, n + 1):
        assert expected_mass(model, s, r).value == pytest.approx(law.mean(law.M(r)), rel=1e-12, abs=1e-15)
    ex = exact_binomial_variances(model, n)
    assert ex["var_K"] == pytest.approx(law.var(law.K), rel=1e-10, abs=1e-14)
    assert ex["var_M0"] == pytest.approx(law.var(law.M(0)), rel=1e-10, abs=1e-14)


@given(n=st.integers(min_value=1, max_value=5000))
@settings(max_examples=25, deadline=None)
def test_good_identity(n):
    for model in (Zipf(2.0), Geometric(0.5), Uniform(100)):
        lhs = (n + 1) * expected_mass(model, Setting.binomial(n), 0).value
        rhs = expected_occupancy(model, Setting.binomial(n + 1), 1).value
        assert lhs == pytest.approx(rhs, rel=1e-9)


@given(t=st.floats(min_value=0.5, max_value=1e5), r=st.integers(min_value=0, max_value=6))
@settings(max_examples=30, deadline=None)
def test_poisson_mass_occupancy_relation(t, r):
    # E M_r(t) = (r + 1) E K_{r+1}(t) / t
    model = Zipf(1.5)
    s = Setting.poisson(t)
    lhs = expected_mass(model, s, r).value
    rhs = (r + 1) * expected_occupancy(model, s, r + 1).value / t
    assert lhs == pytest.approx(rhs, rel=1e-7, abs=1e-12)


@given(t=st.floats(min_value=1.0, max_value=1e5))
@settings(max_examples=30, deadline=None)
def test_variance_sandwich(t):
    for model in (Zipf(2.0), Geometric(0.5), StretchedGeometric(0.5)):
        var = var_coverage_poisson(model, t).value
        lo = expected_occupancy(model, Setting.poisson(2 * t), 1).value / 2
        hi = expected_occupancy(model, Setting.poisson(t), 1).value
        assert lo <= var * (1 + 1e-9) + 1e-9
        assert var <= hi * (1 + 1e-9) + 1e-9


@pytest.mark.parametrize("spec,t", [("zipf:s=2", 1e4), ("geom:q=0.5", 100.0), ("uniform:k=50", 30.0)])
def test_missing_mass_variance_two_ways(spec, t):
    mv = var_missing_mass_poisson(parse_model(spec), t)
    tol = mv.formula.error + mv.direct.error + 1e-10 * mv.direct.value
    assert abs(mv.formula.value - mv.direct.value) <= tol


@given(n=st.integers(min_value=2, max_value=10**6), r=st.integers(min_value=1, max_value=6),
       mass=st.booleans())
@settings(max_examples=60, deadline=None)
def test_binomial_summand_monotone_below_p_convex(n, r, mass):
    if r >= n:
        return
    s = _binomial_pmf_summand(n, r, mass)
    p = np.linspace(s.p_convex * 1e-3, s.p_convex, 400)
    g = s.g(p)
    pg = p * np.gradient(g, p)
    assert np.all(np.diff(g) >= -1e-12 * g.max())
    assert np.all(np.diff(pg[1:-1]) >= -1e-9 * np.abs(pg).max())


@given(t=st.floats(min_value=1.0, max_value=1e7), r=st.integers(min_value=1, max_value=6), mass=st.booleans())
@settings(max_examples=60, deadline=None)
def test_poisson_summand_monotone_below_p_convex(t, r, mass):
    s = _poisson_pmf_summand(t, r, mass)
    p = np.linspace(s.p_convex * 1e-3, s.p_convex, 400)
    g = s.g(p)
    pg = p * np.gradient(g, p)
    assert np.all(np.diff(g) >= -1e-12 * g.max())
    assert np.all(np.diff(pg[1:-1]) >= -1e-9 * np.abs(pg).max())


@pytest.mark.parametrize("eps", [1e-6, 1e-9, 1e-11])
def test_error_respects_relative_tolerance(eps):
    got = expected_coverage(Zipf(1.5), Setting.binomial(10**5), eps)
    assert got.error <= eps * got.value


def test_moment_report_shape_and_identities():
    rep = moment_report(Zipf(2.0), Setting.poisson(1000.0), R=5)
    assert rep.kbar(1) == pytest.approx(rep.EK.value)
    assert rep.k(6) == 0
    for r in range(1, 5):
        assert rep.kbar(r) == pytest.approx(rep.k(r) + rep.kbar(r + 1), rel=1e-9)
    quantities = {row[0] for row in rep.rows()}
    assert {"EK", "EK_r", "EKbar_r", "EM_r"} <= quantities


def test_variance_proxies_ordering():
    v = variance_proxies(Zipf(2.0), 10_000)
    assert 0 < v.v_minus <= v.v_plus
    assert v.var_M0 <= v.v_plus
    assert v.v_slow is None and not v.slow_applies
    for r in (1, 2, 3):
        assert v.v_bar_r[r] <= v.efron_stein_r[r]


def test_slow_variation_certificate_applies_for_stretched_geometric():
    model = StretchedGeometric(0.5)
    cert = slow_variation_certificate(model, 10_000)
    assert cert is not None and cert <= 6.0
    v = variance_proxies(model, 10_000, n0=1000)
    assert v.slow_applies
    assert v.v_slow == pytest.approx(12 * model.rv_meta.auxiliary_a(10_000) / 1e8)
    assert slow_variation_certificate(Zipf(2.0), 1000) is None


@pytest.mark.parametrize("spec", ["zipf:s=2", "zipf:s=1.5", "geom:q=0.5", "uniform:k=1000"])
def test_poissonization_binomial_interval(spec):
    model = parse_model(spec)
    n = 500
    gap = poissonization_gap(model, n)
    lo, hi = gap.var_binomial_interval
    assert lo <= hi
    assert gap.var_ind == pytest.approx(var_independent(model, n).value)
    if model.support is not None:
        exact = exact_binomial_variances(model, n)["var_K"]
        assert lo - 1e-9 <= exact <= hi + 1e-9


@pytest.mark.parametrize("r", [1, 2, 3])
def test_karlin_regular_variation(r):
    z = Zipf(2.0)
    n = 10**6
    pred = karlin_asymptotics(z.rv_meta, n, r)
    s = Setting.binomial(n)
    assert expected_occupancy(z, s, r).value == pytest.approx(pred.EK_r, rel=0.05)
    assert expected_cumulative(z, s, r).value == pytest.approx(pred.EKbar_r, rel=0.05)
    assert expected_coverage(z, s).value == pytest.approx(pred.EK, rel=0.05)


def test_karlin_rejects_bad_index():
    meta = Zipf(2.0).rv_meta
    with pytest.raises(ValueError):
        karlin_asymptotics(meta, 100, 0)


def test_setting_validation():
    with pytest.raises(ValueError):
        Setting.binomial(-1)
    with pytest.raises(ValueError):
        Setting.poisson(-0.5)
    assert Setting.poisson(2.0).label == "poisson(t=2.0)"
