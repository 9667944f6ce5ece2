import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import optimize

from urnlab import bounds as bnd
from urnlab.harness import enumerate_binomial, poisson_gap_log_mgf
from urnlab.models import Explicit, StretchedGeometric, Zipf
from urnlab.moments import Setting, moment_report, variance_proxies

prob_tables = st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=1, max_size=4).map(
    lambda xs: Explicit(tuple(xs))
)


@given(x=st.floats(min_value=-30, max_value=30))
def test_phi_nonnegative_and_below_exp(x):
    v = bnd.phi(x)
    assert v >= 0.0
    if x >= 0:
        assert v >= 0.5 * x * x * (1 - 1e-12)


def test_phi_values_and_continuity():
    assert bnd.phi(0.0) == 0.0
    assert bnd.phi(1.0) == pytest.approx(math.e - 2)
    a, b = bnd.phi(0.99999e-4), bnd.phi(1.00001e-4)
    assert a == pytest.approx(b, rel=1e-4)
    assert bnd.phi(1e-8) == pytest.approx(5e-17, rel=1e-6)
    arr = bnd.phi(np.array([0.0, 1.0]))
    assert isinstance(arr, np.ndarray) and arr.shape == (2,)


def test_subgamma_radius_and_probability():
    right = bnd.SubGammaBound(v=2.0, c=0.5, side="right")
    left = bnd.SubGammaBound(v=2.0, c=0.5, side="left")
    assert right.radius(1.0) == pytest.approx(2.0 + 0.5)
    assert left.radius(1.0) == pytest.approx(2.0)
    assert bnd.tail_radius(right, 4.0) == pytest.approx(math.sqrt(16.0) + 2.0)
    assert right.probability(0.0) == 1.0
    assert bnd.SubGammaBound(1.0, multiplier=4.0).probability(2.0) == pytest.approx(4 * math.exp(-2))
    with pytest.raises(ValueError):
        right.radius(-1.0)


def test_subgamma_validity():
    right = bnd.SubGammaBound(v=1.0, c=0.25)
    assert right.valid(3.9) and not right.valid(4.0) and not right.valid(-0.1)
    assert right.log_laplace(2.0) == pytest.approx(0.5 * 4 / 0.5)
    left = bnd.SubGammaBound(v=1.0, side="left")
    assert left.valid(-10.0) and not left.valid(0.1)
    assert left.log_laplace(-2.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        right.log_laplace(5.0)
    with pytest.raises(ValueError):
        bnd.SubGammaBound(v=-1.0)
    with pytest.raises(ValueError):
        bnd.SubGammaBound(v=1.0, side="up")


def test_subgamma_serialises_plain_fields():
    d = bnd.SubGammaBound(1.5, 0.1, "right", 1.0, "M", "ref").to_dict()
    assert d == {"v": 1.5, "c": 0.1, "side": "right", "multiplier": 1.0, "quantity": "M", "reference": "ref"}


@given(v=st.floats(min_value=1e-6, max_value=1e3), c=st.floats(min_value=0.0, max_value=10.0),
       s=st.floats(min_value=0.01, max_value=20.0))
@settings(max_examples=60, deadline=None)
def test_radius_dominates_cramer_transform(v, c, s):
    # sup_lam (lam x - psi(lam)) >= s at x = radius(s), so the Chernoff bound gives exp(-s)
    b = bnd.SubGammaBound(v=v, c=c)
    x = b.radius(s)
    hi = min(1.0 / c, 1e6) if c > 0 else 1e6
    res = optimize.minimize_scalar(lambda lam: -(lam * x - b.log_laplace(lam)),
                                   bounds=(0.0, hi * (1 - 1e-12)), method="bounded",
                                   options={"xatol": 1e-12})
    assert -res.fun >= s * (1 - 1e-5)


def test_knr_bound_radius():
    k = bnd.KnrBound(r=2, v=9.0)
    assert k.radius(1.0) == pytest.approx(6.0 + 2.0 / 3.0)
    assert k.multiplier == 4.0
    assert k.probability(2.0) == pytest.approx(4 * math.exp(-2))
    assert k.probability(1.0) == 1.0
    sg = k.as_subgamma()
    for s in (0.5, 1.0, 3.0):
        assert sg.radius(s) == pytest.approx(k.radius(s))


def test_knr_bound_from_report():
    rep = moment_report(Zipf(2.0), Setting.binomial(1000), R=4)
    b = bnd.knr_bound(rep, 1000, 2)
    v = 2 * min(max(2 * rep.k(2), 3 * rep.k(3)), rep.kbar(2))
    assert b.v == pytest.approx(v)
    with pytest.raises(ValueError):
        bnd.knr_bound(rep, 1000, 4)
    with pytest.raises(ValueError):
        bnd.knr_bound(moment_report(Zipf(2.0), Setting.poisson(1000), R=4), 1000, 2)


@given(model=prob_tables, n=st.integers(min_value=1, max_value=4),
       lam=st.floats(min_value=-3.0, max_value=3.0))
@settings(max_examples=80, deadline=None)
def test_cumulative_count_sub_poisson_with_mean_factor(model, n, lam):
    law = enumerate_binomial(model.table, n)
    rep = moment_report(model, Setting.binomial(n), R=n + 1)
    for r in range(1, n + 1):
        exact = law.log_mgf(law.Kbar(r), lam)
        assert exact <= bnd.knrbar_log_laplace(rep.kbar(r), lam) + 1e-12


@given(model=prob_tables, n=st.integers(min_value=1, max_value=4),
       lam=st.floats(min_value=0.0, max_value=3.0))
@settings(max_examples=80, deadline=None)
def test_cumulative_count_right_tail_with_min_factor(model, n, lam):
    law = enumerate_binomial(model.table, n)
    rep = moment_report(model, Setting.binomial(n), R=n + 1)
    for r in range(1, n + 1):
        exact = law.log_mgf(law.Kbar(r), lam)
        assert exact <= bnd.knrbar_log_laplace(bnd.knrbar_variance(rep, r), lam) + 1e-12


def test_min_factor_fails_on_left_tail_of_skewed_two_point_law():
    # p = (16/17, 1/17), n = 4: K_n is 1 or 2, E K_{4,1} = 0.19693 < E K_4 = 1.21532.
    # Exact log-MGF at lam = -2 is 0.2246273147 (mpmath), above 0.19693 * phi(-2) = 0.2235844247.
    model = Explicit((16 / 17, 1 / 17))
    law = enumerate_binomial(model.table, 4)
    rep = moment_report(model, Setting.binomial(4), R=5)
    v = bnd.knrbar_variance(rep, 1)
    assert v == pytest.approx(0.19693250799200201, rel=1e-12)
    exact = law.log_mgf(law.K, -2.0)
    assert exact == pytest.approx(0.2246273147, rel=1e-9)
    assert bnd.knrbar_log_laplace(v, -2.0) == pytest.approx(0.2235844247, rel=1e-9)
    assert exact > bnd.knrbar_log_laplace(v, -2.0)
    assert exact <= bnd.knrbar_log_laplace(rep.kbar(1), -2.0)


@given(model=prob_tables, n=st.integers(min_value=1, max_value=4),
       lam=st.floats(min_value=-3.0, max_value=3.0))
@settings(max_examples=80, deadline=None)
def test_missing_mass_bounds_dominate_exact(model, n, lam):
    law = enumerate_binomial(model.table, n)
    vrep = variance_proxies(model, n, R=1)
    left, right = bnd.missing_mass_bounds(vrep, n)
    exact = law.log_mgf(law.M(0), lam)
    if lam <= 0:
        assert exact <= left.log_laplace(lam) + 1e-12
    elif right.valid(lam):
        assert exact <= right.log_laplace(lam) + 1e-12
        pois = moment_report(model, Setting.poisson(n), R=3)
        series = bnd.missing_mass_log_laplace_series(pois, n, lam, model=model)
        assert exact <= series.value + 1e-12


@given(model=prob_tables, t=st.floats(min_value=0.5, max_value=20.0),
       lam=st.floats(min_value=-5.0, max_value=5.0))
@settings(max_examples=80, deadline=None)
def test_good_turing_gap_bounds_dominate_exact(model, t, lam):
    rep = moment_report(model, Setting.poisson(t), R=3)
    lower, upper = bnd.gt_gap_bounds(rep, t)
    exact = poisson_gap_log_mgf(model.table, t, lam)
    if lam >= 0:
        assert exact <= bnd.gt_gap_bennett(rep, t, lam) + 1e-12
        if upper.valid(lam):
            assert exact <= upper.log_laplace(lam) + 1e-12
    else:
        assume(lower.valid(-lam))
        assert exact <= lower.log_laplace(-lam) + 1e-12


def test_gap_bounds_shape():
    rep = moment_report(Zipf(2.0), Setting.poisson(100.0), R=3)
    lower, upper = bnd.gt_gap_bounds(rep, 100.0)
    assert lower.quantity == "M0(t)-G0(t)" and upper.quantity == "G0(t)-M0(t)"
    assert lower.c == upper.c == pytest.approx(0.01)
    assert upper.v == pytest.approx((rep.k(1) + 2 * rep.k(2)) / 1e4)
    assert lower.v == pytest.approx(3 * rep.EK.value / 1e4)
    with pytest.raises(ValueError):
        bnd.gt_gap_bounds(rep, 50.0)
    with pytest.raises(ValueError):
        bnd.gt_gap_bennett(rep, 100.0, -1.0)


def test_missing_mass_right_bound_switches_to_slow_proxy():
    model = StretchedGeometric(0.5)
    vrep = variance_proxies(model, 10_000, n0=1000)
    _, right = bnd.missing_mass_bounds(vrep, 10_000)
    assert right.v == pytest.approx(vrep.v_slow)
    vrep_early = variance_proxies(model, 10_000, n0=10**6)
    _, right_early = bnd.missing_mass_bounds(vrep_early, 10_000)
    assert right_early.v == pytest.approx(vrep_early.v_plus)
    with pytest.raises(ValueError):
        bnd.missing_mass_bounds(vrep, 999)


def test_log_sobolev_bound_sides():
    vrep = variance_proxies(Zipf(2.0), 1000)
    for side in ("left", "right"):
        b = bnd.log_sobolev_bound(vrep, side)
        assert b.v == vrep.w_n and b.c == 0.0


def test_series_domain_and_remainder():
    rep = moment_report(Zipf(2.0), Setting.poisson(100.0), R=4)
    assert bnd.missing_mass_log_laplace_series(rep, 100.0, 0.0).value == 0.0
    with pytest.raises(ValueError):
        bnd.missing_mass_log_laplace_series(rep, 100.0, 100.0)
    with pytest.raises(ValueError):
        bnd.missing_mass_log_laplace_series(rep, 100.0, -1.0)
    coarse = bnd.missing_mass_log_laplace_series(rep, 100.0, 50.0)
    fine = bnd.missing_mass_log_laplace_series(rep, 100.0, 50.0, model=Zipf(2.0))
    assert fine.error <= 1e-12 < coarse.error
    assert fine.value <= coarse.value
