import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urnlab.estimators import (
    EstimateWithCI,
    GapCovariance,
    alpha_hat,
    clt_normalizer,
    good_turing,
    gt_ci_endpoints,
    gt_ci_poisson,
    gt_mm_covariance_poisson,
    species_estimate,
)
from urnlab.models import Geometric, Uniform, Zipf
from urnlab.moments import Setting, expected_occupancy, moment_report, var_missing_mass_poisson
from urnlab.sampler import OccupancyProfile, make_rng, sample_poisson, true_mass

counts_strategy = st.dictionaries(
    st.integers(min_value=1, max_value=10**5), st.integers(min_value=1, max_value=20), min_size=1, max_size=40
)


def test_good_turing_small_profile():
    p = OccupancyProfile.from_counts({1: 1, 2: 1, 3: 1, 4: 7})
    assert good_turing(p, 0) == pytest.approx(0.3)
    assert good_turing(p, 1) == 0.0
    assert good_turing(p, 6) == pytest.approx(0.7)


def test_good_turing_poisson_uses_intensity():
    p = OccupancyProfile.from_counts({1: 1, 2: 3}, "poisson", 8.0)
    assert good_turing(p, 0) == pytest.approx(1 / 8)


def test_good_turing_rejects_bad_input():
    with pytest.raises(ValueError):
        good_turing(OccupancyProfile.empty(), 0)
    with pytest.raises(ValueError):
        good_turing(OccupancyProfile.from_counts({1: 1}), -1)


@given(counts=counts_strategy)
def test_good_turing_masses_sum_to_one(counts):
    p = OccupancyProfile.from_counts(counts)
    total = sum(good_turing(p, r) for r in range(0, max(counts.values())))
    assert total == pytest.approx(1.0)
    assert all(0.0 <= good_turing(p, r) <= 1.0 for r in range(0, 5))


def test_ci_endpoints_hand_values():
    # L = log(1/delta) = log 40
    L = math.log(40.0)
    lo, hi = gt_ci_endpoints(100, 30, 10, 1000.0, 0.025)
    assert hi == pytest.approx(0.03 + (math.sqrt(600 * L) + 5 * L) / 1000)
    assert lo == pytest.approx(0.03 - (math.sqrt(2 * 50 * L) + 4 * L) / 1000)


def test_ci_endpoints_vectorised():
    lo, hi = gt_ci_endpoints(np.array([100, 200]), np.array([30, 60]), np.array([10, 20]), 1000.0, 0.025)
    assert lo.shape == hi.shape == (2,)
    assert np.all(lo < hi)


@pytest.mark.parametrize("delta", [0.0, 0.25, 0.5, -0.1])
def test_ci_rejects_vacuous_delta(delta):
    p = OccupancyProfile.from_counts({1: 1}, "poisson", 1.0)
    with pytest.raises(ValueError):
        gt_ci_poisson(p, 1.0, delta)


@given(counts=counts_strategy, t=st.floats(min_value=1.0, max_value=1e6),
       delta=st.floats(min_value=1e-6, max_value=0.2499))
@settings(max_examples=80)
def test_ci_is_clipped_and_contains_point(counts, t, delta):
    p = OccupancyProfile.from_counts(counts, "poisson", t)
    ci = gt_ci_poisson(p, None, delta)
    assert 0.0 <= ci.lower <= ci.upper <= 1.0
    assert ci.lower <= min(ci.point, 1.0)
    assert ci.coverage_target == pytest.approx(1 - 4 * delta)
    raw_lo, raw_hi = gt_ci_endpoints(p.K, p.K_r(1), p.K_r(2), t, delta)
    assert ci.clipped_lower == (raw_lo < 0)
    assert ci.clipped_upper == (raw_hi > 1)


def test_ci_needs_intensity():
    p = OccupancyProfile.from_counts({1: 1})
    with pytest.raises(ValueError):
        gt_ci_poisson(p, None, 0.1)


def test_ci_serialises():
    p = OccupancyProfile.from_counts({1: 1, 2: 2, 3: 1}, "poisson", 4.0)
    ci = gt_ci_poisson(p, 4.0, 0.1)
    d = json.loads(ci.to_json())
    assert d["inputs_digest"] == p.digest()
    assert EstimateWithCI(**d) == ci
    assert ci.contains(ci.point)


def test_ci_coverage_small_monte_carlo():
    model, t, delta = Zipf(2.0), 2000.0, 0.05
    hits = 0
    R = 300
    for i in range(R):
        prof = sample_poisson(model, t, make_rng(4, i))
        hits += gt_ci_poisson(prof, t, delta).contains(true_mass(model, prof, 0))
    assert hits / R >= 0.8 - 3 * math.sqrt(0.8 * 0.2 / R)


def test_alpha_hat_values():
    p = OccupancyProfile.from_counts({1: 1, 2: 1, 3: 2, 4: 5})
    assert alpha_hat(p, 1) == pytest.approx(2 / 4)
    assert alpha_hat(p, 2) == pytest.approx(2 * 1 / 2)
    assert alpha_hat(p, 6) is None
    with pytest.raises(ValueError):
        alpha_hat(p, 0)


@given(counts=counts_strategy, r=st.integers(min_value=1, max_value=5))
def test_alpha_hat_bounded_by_level(counts, r):
    p = OccupancyProfile.from_counts(counts)
    a = alpha_hat(p, r)
    if p.Kbar(r) == 0:
        assert a is None
    else:
        assert 0.0 <= a <= r


def test_alpha_hat_consistent_for_zipf():
    prof = sample_poisson(Zipf(2.0), 1e6, 1)
    assert alpha_hat(prof, 1) == pytest.approx(0.5, abs=0.05)


def test_species_estimate_regimes():
    p = OccupancyProfile.from_counts({1: 1, 2: 1, 3: 2, 4: 2, 5: 5})
    a = 0.5
    g = 2**a - 1
    assert species_estimate(p, 2.0, a, regime="coverage") == pytest.approx(g * 5)
    assert species_estimate(p, 2.0, a, regime="singletons") == pytest.approx(g / a * 2)
    assert species_estimate(p, 2.0, a, r_used=2, regime="level") == pytest.approx(2 / 0.5 * g / a * 2)
    assert species_estimate(p, 2.0, r_used=1, regime="slow") == pytest.approx(math.log(2) * 2)


def test_species_estimate_errors():
    p = OccupancyProfile.from_counts({1: 1, 2: 2})
    with pytest.raises(ValueError):
        species_estimate(p, 1.0, 0.5)
    with pytest.raises(ValueError):
        species_estimate(p, 2.0, 1.5)
    with pytest.raises(ValueError):
        species_estimate(p, 2.0, 1.0, r_used=2, regime="level")
    with pytest.raises(ValueError):
        species_estimate(p, 2.0, 0.5, regime="nope")


@given(tau=st.floats(min_value=1.001, max_value=100.0), a=st.floats(min_value=0.01, max_value=1.0))
def test_singleton_forecast_monotone_in_tau(tau, a):
    p = OccupancyProfile.from_counts({1: 1, 2: 1, 3: 3})
    f1 = species_estimate(p, tau, a)
    f2 = species_estimate(p, tau * 1.5, a)
    assert 0.0 < f1 < f2


def test_covariance_matrix_entries():
    model, t = Geometric(0.5), 50.0
    rep = moment_report(model, Setting.poisson(t), R=3)
    k2d = expected_occupancy(model, Setting.poisson(2 * t), 2).value
    cov = gt_mm_covariance_poisson(rep, t, k2d)
    b = k2d / (2 * t * t)
    assert cov.cov_GM == pytest.approx(-b)
    assert cov.var_M == pytest.approx(var_missing_mass_poisson(model, t).value, rel=1e-10)
    assert cov.var_G == pytest.approx(rep.k(1) / t**2 - b)
    assert cov.var_gap == pytest.approx((rep.k(1) + 2 * rep.k(2)) / t**2)


def test_covariance_against_direct_sum():
    # G_0 - M_0 = sum_j (1{X_j=1}/t - p_j 1{X_j=0}) with independent Poisson X_j
    model, t = Uniform(20), 15.0
    p = 1 / 20
    x = t * p
    var_g = 20 * math.exp(-x) * x * (1 - math.exp(-x) * x) / t**2
    var_m = 20 * p * p * math.exp(-x) * (1 - math.exp(-x))
    cov = 20 * (-p / t * math.exp(-x) * x * math.exp(-x))
    rep = moment_report(model, Setting.poisson(t), R=3)
    k2d = expected_occupancy(model, Setting.poisson(2 * t), 2).value
    got = gt_mm_covariance_poisson(rep, t, k2d)
    assert got.var_G == pytest.approx(var_g, rel=1e-12)
    assert got.var_M == pytest.approx(var_m, rel=1e-12)
    assert got.cov_GM == pytest.approx(cov, rel=1e-12)


def test_gap_covariance_dataclass():
    assert GapCovariance(1.0, 2.0, -0.5).var_gap == pytest.approx(4.0)


def test_clt_normalizer():
    rep = moment_report(Zipf(2.0), Setting.poisson(1000.0), R=3)
    assert clt_normalizer(rep, 1000.0) == pytest.approx(rep.k(1) / math.sqrt(rep.k(1) + 2 * rep.k(2)))
    with pytest.raises(ValueError):
        clt_normalizer(rep, 10.0)
