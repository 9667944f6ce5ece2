import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urnlab.harness import (
    COLUMNS,
    McReport,
    Verdict,
    _clean,
    check_ci_coverage,
    check_clt,
    check_tail_bounds,
    enumerate_binomial,
    experiment_asymptotics,
    poisson_gap_log_mgf,
    run_replicates,
    search_n0,
    tail_verdict,
)
from urnlab.models import Explicit, Geometric, StretchedGeometric, Uniform, Zipf
from urnlab.moments import Setting


@pytest.mark.parametrize("probs,n", [((0.5, 0.5), 3), ((0.7, 0.2, 0.1), 4), ((1.0,), 2)])
def test_enumeration_weights_and_sizes(probs, n):
    law = enumerate_binomial(probs, n)
    assert law.weights.sum() == pytest.approx(1.0)
    assert np.all(law.counts.sum(axis=1) == n)
    assert law.mean(law.M(0) + sum(law.M(r) for r in range(1, n + 1))) == pytest.approx(1.0)


def test_enumeration_birthday_two_draws():
    law = enumerate_binomial((0.25,) * 4, 2)
    # P(both draws equal) = 1/4
    assert law.mean(law.K) == pytest.approx(1.75)
    assert law.var(law.K) == pytest.approx(0.1875)


def test_enumeration_refuses_huge_instances():
    with pytest.raises(ValueError):
        enumerate_binomial((0.25,) * 4, 12)


def test_poisson_gap_single_symbol_closed_form():
    p, t, lam = 1.0, 2.0, 0.7
    a, b = math.exp(-t), t * math.exp(-t)
    c = 1 - a - b
    mean = b / t - a * p
    expected = math.log(a * math.exp(-lam * p) + b * math.exp(lam / t) + c) - lam * mean
    assert poisson_gap_log_mgf([p], t, lam) == pytest.approx(expected, rel=1e-14)


@given(probs=st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=1, max_size=5),
       t=st.floats(min_value=0.1, max_value=50.0))
@settings(max_examples=40)
def test_poisson_gap_log_mgf_vanishes_at_zero_and_is_convex(probs, t):
    p = np.asarray(probs) / np.sum(probs)
    assert abs(poisson_gap_log_mgf(p, t, 0.0)) < 1e-12
    f = [poisson_gap_log_mgf(p, t, lam) for lam in (-1.0, 0.0, 1.0)]
    assert f[0] + f[2] >= 2 * f[1] - 1e-12
    assert min(f) >= -1e-12


def test_replicates_independent_of_worker_count():
    model = Zipf(2.0)
    a = run_replicates(model, Setting.binomial(500), 24, seed=3, jobs=1)
    b = run_replicates(model, Setting.binomial(500), 24, seed=3, jobs=2)
    assert np.array_equal(a.data, b.data)
    assert a.digest() == b.digest()
    assert a.data.shape == (24, len(COLUMNS))


def test_replicate_columns_consistent():
    st_ = run_replicates(Geometric(0.3), Setting.poisson(200.0), 50, seed=1)
    assert np.all(st_.kbar(1) == st_.column("K"))
    assert np.all(st_.column("Kbar_2") == st_.column("K") - st_.column("K_1"))
    assert np.allclose(st_.column("G_0"), st_.column("K_1") / 200.0)
    assert np.all((st_.column("M_0") >= 0) & (st_.column("M_0") <= 1))
    d = st_.describe()
    assert "max_index" not in d and d["K"]["stderr"] > 0


def test_single_replicate_has_no_variance():
    st_ = run_replicates(Uniform(5), Setting.binomial(3), 1, seed=0)
    assert st_.var("K") is None and st_.stderr("K") is None
    with pytest.raises(ValueError):
        run_replicates(Uniform(5), Setting.binomial(3), 0, seed=0)


def test_verdict_directions():
    assert Verdict("u", 0.1, 0.12, 0.03).passed
    assert not Verdict("u", 0.1, 0.14, 0.03).passed
    assert Verdict("l", 0.9, 0.88, 0.03, kind="lower").passed
    assert not Verdict("l", 0.9, 0.86, 0.03, kind="lower").passed


def test_tail_verdict_slack():
    exceed = np.zeros(400, dtype=bool)
    exceed[:30] = True
    v = tail_verdict("x", exceed, 0.05, s=3.0)
    assert v.empirical == pytest.approx(0.075)
    assert v.slack == pytest.approx(3 * math.sqrt(0.05 * 0.95 / 400))
    assert v.passed  # 0.075 <= 0.05 + 0.0327
    assert tail_verdict("x", exceed, 2.0, s=0.1).bound == 1.0


def test_clean_and_report_serialisation():
    rep = McReport("demo", "zipf:s=2.0", "binomial(n=10)", 5, 0)
    rep.quantities = {"a": np.float64(0.1), "b": float("nan"), "c": np.arange(3), "d": np.bool_(True)}
    rep.verdicts.append(Verdict("v", 1 / 3, 0.2, 0.0))
    text = rep.to_json()
    assert text.endswith("\n")
    parsed = json.loads(text)
    assert parsed["quantities"] == {"a": 0.1, "b": None, "c": [0, 1, 2], "d": True}
    assert parsed["passed"] is True
    assert list(parsed) == sorted(parsed)
    csv_text = rep.to_csv()
    assert "0.33333333333333331" in csv_text
    assert "\r" not in csv_text
    assert _clean({1: (np.int64(2),)}) == {"1": [2]}


def test_report_passed_ignores_informational_verdicts():
    rep = McReport("demo", "m", "s", 1, 0)
    rep.verdicts.append(Verdict("info", 0.0, 1.0, 0.0, required=False))
    assert rep.passed


def test_search_n0():
    n0, table = search_n0(StretchedGeometric(0.5), [100, 1000, 10_000])
    assert n0 is not None and n0 <= 10_000
    assert all(row["holds"] for row in table if row["n"] >= n0)
    assert search_n0(Zipf(2.0), [100, 1000])[0] is None


def test_tail_bounds_small_run_binomial():
    rep = check_tail_bounds(Zipf(2.0), Setting.binomial(2000), R=300, seed=5)
    assert rep.passed
    names = {v.name for v in rep.verdicts}
    assert any(name.startswith("K_1") for name in names)
    assert any("M0 left" in name for name in names)
    assert all(0.0 <= v.bound <= 1.0 for v in rep.verdicts)


def test_tail_bounds_small_run_poisson_includes_gap():
    rep = check_tail_bounds(Geometric(0.5), Setting.poisson(300.0), R=200, seed=2)
    assert rep.passed
    assert any("G0" in v.name or "gap" in v.name.lower() for v in rep.verdicts)


def test_tail_bounds_slow_proxy_is_required_when_certified():
    rep = check_tail_bounds(StretchedGeometric(0.5), Setting.binomial(10_000), R=100, seed=1, n0=1000)
    slow = [v for v in rep.verdicts if "slow" in v.name]
    assert slow and all(v.required for v in slow)


def test_ci_coverage_small_run():
    rep = check_ci_coverage(Zipf(2.0), 5000.0, 0.025, R=200, seed=0)
    assert rep.passed
    assert rep.quantities["coverage"] >= 0.9 - 3 * math.sqrt(0.09 / 200)


def test_clt_skips_degenerate_model():
    rep = check_clt(Explicit((1.0,)), 50.0, R=10, seed=0)
    assert rep.verdicts == [] and "note" in rep.extra


def test_clt_small_run_reports_pvalue():
    rep = check_clt(Zipf(2.0), 1e4, R=200, seed=0)
    assert 0.0 <= rep.quantities["p_value"] <= 1.0
    assert rep.verdicts[0].kind == "lower"


def test_asymptotics_regular_variation():
    rep = experiment_asymptotics(Zipf(2.0), [10_000, 1_000_000], seed=0, realize=False)
    assert rep.passed
    assert rep.extra["regime"] == "regular"
    assert len(rep.verdicts) == 4


def test_asymptotics_needs_metadata():
    with pytest.raises(ValueError):
        experiment_asymptotics(Uniform(10), [100], seed=0)
