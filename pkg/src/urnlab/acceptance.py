"""The fourteen acceptance checks, shared by the test suite and ``urnlab verify``.

Each check returns a :class:`CriterionResult` with a pass flag and the
numbers behind it.  Monte Carlo runs are cached inside an
:class:`AcceptanceRun` so checks that look at the same replicates (missing
mass variance and interval coverage at ``t = 10^4``) draw them once.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import bounds as bnd
from .estimators import alpha_hat, species_estimate
from .harness import (
    ReplicateStats,
    _clean,
    check_ci_coverage,
    check_clt,
    check_tail_bounds,
    enumerate_binomial,
    experiment_asymptotics,
    experiment_lighttail,
    poisson_gap_log_mgf,
    run_replicates,
    search_n0,
)
from .models import Explicit, FastVariation, FrequencyModel, Geometric, StretchedGeometric, Uniform, Zipf
from .moments import (
    Setting,
    exact_binomial_variances,
    expected_coverage,
    expected_mass,
    expected_occupancy,
    moment_report,
    var_coverage_poisson,
    var_missing_mass_poisson,
    variance_proxies,
)
from .sampler import OccupancyProfile, make_rng, sample_binomial

__all__ = ["CriterionResult", "AcceptanceRun", "CRITERIA", "run_acceptance", "small_models"]

LAMBDA_GRID = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)
_MGF_TOL = 1e-12


def small_models() -> list:
    """Finite models with support at most 4 used by the exhaustive checks."""
    return [
        Uniform(1),
        Uniform(2),
        Uniform(3),
        Uniform(4),
        Explicit((0.6, 0.4)),
        Explicit((0.5, 0.3, 0.2)),
        Explicit((0.4, 0.3, 0.2, 0.1)),
        Explicit((0.7, 0.1, 0.1, 0.1)),
        Explicit((0.97, 0.01, 0.01, 0.01)),
        # a skewed two-point law: at n = 4, r = 1, lam = -2 the exact log-MGF of
        # K_n exceeds r E K_{n,r} phi(lam), so the min(...) variance factor fails here
        Explicit((0.95, 0.05)),
    ]


def five_models() -> list:
    return [Uniform(100), Zipf(2.0), Geometric(0.5), StretchedGeometric(0.5), FastVariation()]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}"

    def to_dict(self, timing: bool = False) -> dict:
        out = {"number": self.number, "title": self.title, "passed": self.passed, "details": self.details}
        if timing:
            out["seconds"] = self.seconds
        return _clean(out)


@dataclass
class AcceptanceRun:
    """Configuration and replicate cache for one acceptance pass."""

    seed: int = 0
    R: int = 10_000
    jobs: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    def replicates(self, model: FrequencyModel, setting: Setting, R: Optional[int] = None, salt: int = 0) -> ReplicateStats:
        R = self.R if R is None else R
        key = (model.spec, setting, R, salt)
        if key not in self._cache:
            self._cache[key] = run_replicates(model, setting, R, self.seed + salt, self.jobs)
        return self._cache[key]


# ---------------------------------------------------------------------------
# the criteria
# ---------------------------------------------------------------------------


def criterion_1(run: AcceptanceRun) -> CriterionResult:
    """Moments against exhaustive enumeration, relative tolerance 1e-10."""
    worst = 0.0
    failures = []
    checked = 0
    for model in small_models():
        probs = model.head_probs(model.support)
        for n in range(1, 5):
            law = enumerate_binomial(probs, n)
            setting = Setting.binomial(n)
            pairs = [("EK", expected_coverage(model, setting).value, law.mean(law.K))]
            for r in range(1, n + 1):
                pairs.append((f"EK_{r}", expected_occupancy(model, setting, r).value, law.mean(law.K_r(r))))
            for r in range(0, n + 1):
                pairs.append((f"EM_{r}", expected_mass(model, setting, r).value, law.mean(law.M(r))))
            ex = exact_binomial_variances(model, n)
            pairs.append(("var_K", ex["var_K"], law.var(law.K)))
            pairs.append(("var_M0", ex["var_M0"], law.var(law.M(0))))
            for name, got, want in pairs:
                checked += 1
                if want == 0.0:
                    # relative error is undefined at an exact zero (e.g. var K_1 = 0);
                    # the pairwise variance formula leaves rounding residue of order 1e-16
                    bad = abs(got) > 1e-14
                else:
                    err = abs(got - want) / abs(want)
                    worst = max(worst, err)
                    bad = err > 1e-10
                if bad:
                    failures.append({"model": model.spec, "n": n, "quantity": name, "got": got, "want": want})
    return CriterionResult(1, "moments match exhaustive enumeration (support <= 4, n <= 4)", not failures,
                           {"checked": checked, "worst_relative_error": worst, "failures": failures[:10]})


def criterion_2(run: AcceptanceRun) -> CriterionResult:
    rows = []
    ok = True
    for model in (Zipf(2.0), Geometric(0.5), Uniform(100)):
        for n in (1, 10, 100, 1000):
            lhs = (n + 1) * expected_mass(model, Setting.binomial(n), 0, 1e-13).value
            rhs = expected_occupancy(model, Setting.binomial(n + 1), 1, 1e-13).value
            rel = abs(lhs - rhs) / abs(rhs)
            ok &= rel <= 1e-10
            rows.append({"model": model.spec, "n": n, "lhs": lhs, "rhs": rhs, "relative_error": rel})
    return CriterionResult(2, "(n+1) E M_n,0 = E K_n+1,1 to 1e-10", ok, {"rows": rows})


def criterion_3(run: AcceptanceRun) -> CriterionResult:
    n = 100
    model = Uniform(n * n)
    ek = expected_coverage(model, Setting.poisson(n)).value
    var = var_coverage_poisson(model, n).value
    ek_lo, ek_hi = n - 0.5, n - 0.5 + 1.0 / (6 * n)
    v_lo, v_hi = n - 1.0 / (6 * n), n + 1.0 / (12 * n)
    ek_ok = ek_lo <= ek <= ek_hi
    var_ok = v_lo <= var <= v_hi
    closed = n * n * (math.exp(-1.0 / n) - math.exp(-2.0 / n))
    return CriterionResult(
        3, "birthday scenario, uniform(10^4) at t = 100", ek_ok and var_ok,
        {"EK": ek, "EK_interval": [ek_lo, ek_hi], "EK_in_interval": ek_ok,
         "var_K": var, "var_interval": [v_lo, v_hi], "var_in_interval": var_ok,
         "var_closed_form": closed},
    )


def criterion_4(run: AcceptanceRun) -> CriterionResult:
    rows = []
    ok = True
    for model in five_models():
        for t in (100, 10_000):
            var = var_coverage_poisson(model, t)
            lo = 0.5 * expected_occupancy(model, Setting.poisson(2 * t), 1).value
            hi = expected_occupancy(model, Setting.poisson(t), 1).value
            holds = lo <= var.value <= hi
            ok &= holds
            rows.append({"model": model.spec, "t": t, "lower": lo, "var_K": var.value, "upper": hi, "holds": holds})
    return CriterionResult(4, "E K_1(2t)/2 <= var K(t) <= E K_1(t)", ok, {"rows": rows})


def _var_stderr(x: np.ndarray) -> float:
    """Standard error of the sample variance."""
    R = x.size
    d = x - x.mean()
    m2 = np.mean(d**2)
    m4 = np.mean(d**4)
    return math.sqrt(max(m4 - m2 * m2 * (R - 3) / (R - 1), 0.0) / R)


def criterion_5(run: AcceptanceRun) -> CriterionResult:
    t = 10_000
    rows = []
    ok = True
    for model in (Zipf(2.0), Geometric(0.5)):
        st = run.replicates(model, Setting.poisson(t))
        m0 = st.column("M_0")
        exact = var_missing_mass_poisson(model, t)
        var_mc = float(np.var(m0, ddof=1))
        se = _var_stderr(m0)
        holds = abs(var_mc - exact.value) <= 3.0 * se
        ok &= holds
        rows.append({"model": model.spec, "exact": exact.value, "direct_sum": exact.direct,
                     "var_MC": var_mc, "stderr": se, "z": (var_mc - exact.value) / se if se else None,
                     "holds": holds})
    return CriterionResult(5, "Poisson missing-mass variance against Monte Carlo at t = 10^4", ok,
                           {"R": run.R, "rows": rows})


def criterion_6(run: AcceptanceRun) -> CriterionResult:
    worst = -math.inf
    violations = []
    checked = 0

    def record(label, exact, bound):
        nonlocal worst, checked
        checked += 1
        worst = max(worst, exact - bound)
        if exact > bound + _MGF_TOL:
            violations.append({**label, "exact": exact, "bound": bound})

    for model in small_models():
        probs = model.head_probs(model.support)
        for n in range(1, 5):
            law = enumerate_binomial(probs, n)
            binom = moment_report(model, Setting.binomial(n), R=n + 1)
            pois = moment_report(model, Setting.poisson(n), R=max(n, 2) + 1)
            vrep = variance_proxies(model, n, R=1)
            for r in range(1, n + 1):
                vbar = bnd.knrbar_variance(binom, r)
                x = law.Kbar(r)
                for lam in LAMBDA_GRID:
                    record({"model": model.spec, "n": n, "Z": f"K_n,>={r}", "lam": lam},
                           law.log_mgf(x, lam), bnd.knrbar_log_laplace(vbar, lam))
            m0 = law.M(0)
            left, right = bnd.SubGammaBound(vrep.v_minus, 0.0, "left"), bnd.SubGammaBound(vrep.v_plus, 1.0 / n, "right")
            for lam in LAMBDA_GRID:
                exact = law.log_mgf(m0, lam)
                label = {"model": model.spec, "n": n, "Z": "M_n,0", "lam": lam}
                if lam < 0:
                    record({**label, "bound": "left v_minus"}, exact, left.log_laplace(lam))
                elif right.valid(lam):
                    record({**label, "bound": "right v_plus"}, exact, right.log_laplace(lam))
                    series = bnd.missing_mass_log_laplace_series(pois, n, lam, model=model)
                    record({**label, "bound": "log-Laplace series"}, exact, series.value)
            t = float(n)
            for lam in LAMBDA_GRID:
                exact = poisson_gap_log_mgf(probs, t, lam)
                label = {"model": model.spec, "t": t, "Z": "G0-M0", "lam": lam}
                lower, upper = bnd.gt_gap_bounds(pois, t)
                if lam >= 0:
                    record({**label, "bound": "Bennett"}, exact, bnd.gt_gap_bennett(pois, t, lam))
                    if upper.valid(lam):
                        record({**label, "bound": "upper sub-gamma"}, exact, upper.log_laplace(lam))
                elif lower.valid(-lam):
                    record({**label, "bound": "lower sub-gamma"}, exact, lower.log_laplace(-lam))
    return CriterionResult(6, "exact log-MGF never exceeds the bound on small instances", not violations,
                           {"checked": checked, "max_excess": worst, "violations": violations[:10]})


def criterion_7(run: AcceptanceRun) -> CriterionResult:
    n = 10_000
    reports = []
    zipf = Zipf(2.0)
    rep_z = check_tail_bounds(zipf, Setting.binomial(n), run.R, run.seed,
                              replicates=run.replicates(zipf, Setting.binomial(n)))
    reports.append(rep_z)
    sg = StretchedGeometric(0.5)
    n0, table = search_n0(sg, [10, 30, 100, 300, 1000, 3000, 10_000])
    rep_s = check_tail_bounds(sg, Setting.binomial(n), run.R, run.seed, n0=n0 if n0 is not None else 2**62,
                              replicates=run.replicates(sg, Setting.binomial(n)))
    reports.append(rep_s)
    ok = all(r.passed for r in reports)
    failed = [
        {"model": r.model, **v.to_dict()} for r in reports for v in r.verdicts if v.required and not v.passed
    ]
    return CriterionResult(7, "empirical tail frequencies within the bounds at n = 10^4", ok,
                           {"n0_search": table, "n0": n0, "failed": failed,
                            "verdicts": {r.model: [v.to_dict() for v in r.verdicts] for r in reports}})


def criterion_8(run: AcceptanceRun) -> CriterionResult:
    n = 1_000_000
    model = Zipf(2.0)
    alpha = 0.5
    vrep = variance_proxies(model, n, R=1)
    ratio_pm = vrep.v_minus / vrep.v_plus
    st = run.replicates(model, Setting.binomial(n))
    var_mc = st.var("M_0")
    target = 1.0 / (1.0 - 2.0 ** (alpha - 2.0))
    ratio_mc = vrep.v_minus / var_mc
    ok1 = abs(ratio_pm - alpha / 2) <= 0.05
    ok2 = abs(ratio_mc / target - 1.0) <= 0.25
    return CriterionResult(8, "variance-proxy ratios for zipf(2) at n = 10^6", ok1 and ok2,
                           {"v_minus": vrep.v_minus, "v_plus": vrep.v_plus, "v_minus/v_plus": ratio_pm,
                            "target_ratio": alpha / 2, "var_MC": var_mc, "v_minus/var_MC": ratio_mc,
                            "target_v_minus/var": target, "first_ok": ok1, "second_ok": ok2})


def criterion_9(run: AcceptanceRun) -> CriterionResult:
    t = 10_000
    model = Zipf(2.0)
    rep = check_ci_coverage(model, t, 0.025, run.R, run.seed, replicates=run.replicates(model, Setting.poisson(t)))
    return CriterionResult(9, "Good-Turing interval coverage at delta = 0.025, t = 10^4", rep.passed,
                           {"verdict": rep.verdicts[0].to_dict(), **rep.quantities})


def criterion_10(run: AcceptanceRun) -> CriterionResult:
    t = 1_000_000
    model = Zipf(2.0)
    rep = check_clt(model, t, run.R, run.seed, replicates=run.replicates(model, Setting.poisson(t)))
    return CriterionResult(10, "KS test of the standardised ratio G0/M0 at t = 10^6", rep.passed,
                           {**rep.quantities, "normalizer": rep.extra.get("normalizer")})


def criterion_11(run: AcceptanceRun) -> CriterionResult:
    grid = [10_000, 100_000, 1_000_000]
    reports = [
        experiment_asymptotics(Zipf(2.0), grid, run.seed),
        experiment_asymptotics(FastVariation(), grid, run.seed),
        experiment_asymptotics(StretchedGeometric(0.5), grid, run.seed),
    ]
    ok = all(r.passed for r in reports)
    return CriterionResult(11, "exact moments against Karlin-type equivalents at n = 10^6", ok,
                           {r.model: {"regime": r.extra["regime"], "tolerance": r.extra["tolerance"],
                                      "verdicts": [v.to_dict() for v in r.verdicts],
                                      "last_row": r.quantities["rows"][-1]} for r in reports})


def _merge(a: OccupancyProfile, b: OccupancyProfile) -> OccupancyProfile:
    counts = a.count_map()
    for j, x in b.count_map().items():
        counts[j] = counts.get(j, 0) + x
    return OccupancyProfile.from_counts(counts)


def criterion_12(run: AcceptanceRun, pairs: int = 100) -> CriterionResult:
    n = 1_000_000
    model = Zipf(2.0)
    single = sample_binomial(model, n, make_rng(run.seed, 12, 0))
    a1 = alpha_hat(single, 1)
    ok1 = abs(a1 - 0.5) < 0.05
    forecasts, realized, forms = [], [], {"coverage": [], "level2": []}
    for i in range(pairs):
        first = sample_binomial(model, n, make_rng(run.seed, 12, 1, i))
        second = sample_binomial(model, n, make_rng(run.seed, 12, 2, i))
        both = _merge(first, second)
        realized.append(both.K - first.K)
        forecasts.append(species_estimate(first, 2.0, regime="singletons"))
        forms["coverage"].append(species_estimate(first, 2.0, alpha=alpha_hat(first, 1), regime="coverage"))
        forms["level2"].append(species_estimate(first, 2.0, alpha=alpha_hat(first, 1), r_used=2, regime="level"))
    mean_f, mean_r = float(np.mean(forecasts)), float(np.mean(realized))
    rel = abs(mean_f / mean_r - 1.0)
    ok2 = rel <= 0.10
    return CriterionResult(12, "index estimate and species forecast for zipf(2) at n = 10^6", ok1 and ok2,
                           {"alpha_hat_1": a1, "alpha_hat_2": alpha_hat(single, 2), "alpha_hat_3": alpha_hat(single, 3),
                            "mean_forecast": mean_f, "mean_realized": mean_r, "relative_error": rel,
                            "mean_forecast_coverage_form": float(np.mean(forms["coverage"])),
                            "mean_forecast_level2_form": float(np.mean(forms["level2"])),
                            "pairs": pairs, "first_ok": ok1, "second_ok": ok2})


def criterion_13(run: AcceptanceRun) -> CriterionResult:
    rep = experiment_lighttail(0.05, [1_000, 3_000, 10_000, 30_000, 100_000], run.R, run.seed, jobs=run.jobs)
    by_name = {v.name: v for v in rep.verdicts}
    c_ok = by_name["(c) P(G_n,0 = 0, M_n,0 > 0) > 0 at some n"].passed
    b_ok = by_name["(b) two-point mass of M_n,0"].passed
    return CriterionResult(13, "light-tail pathologies (Good-Turing failure, two-point missing mass)", c_ok and b_ok,
                           {"gt_failure_ok": c_ok, "two_point_ok": b_ok,
                            "verdicts": [v.to_dict() for v in rep.verdicts], **rep.quantities,
                            "models": rep.extra["models"]})


DETERMINISM_SUBSET = (1, 2, 5, 7, 9, 13)


def criterion_14(run: AcceptanceRun, R: int = 300) -> CriterionResult:
    """Re-run a subset of checks from scratch with the same seed; serialised output must match."""

    def once(jobs: int) -> str:
        fresh = AcceptanceRun(seed=run.seed, R=R, jobs=jobs)
        results = [CRITERIA[k][1](fresh) for k in DETERMINISM_SUBSET]
        return json.dumps([r.to_dict() for r in results], sort_keys=True)

    first = once(1)
    second = once(1)
    parallel = once(2)
    same = first == second
    same_jobs = first == parallel
    return CriterionResult(14, "same seed gives byte-identical reports", same and same_jobs,
                           {"subset": list(DETERMINISM_SUBSET), "R": R, "rerun_identical": same,
                            "jobs_1_vs_2_identical": same_jobs, "bytes": len(first)})


CRITERIA: dict = {
    1: ("exact-oracle equivalence", criterion_1),
    2: ("Good identity", criterion_2),
    3: ("birthday example", criterion_3),
    4: ("variance sandwich", criterion_4),
    5: ("Poisson missing-mass variance", criterion_5),
    6: ("log-MGF dominance", criterion_6),
    7: ("tail-bound domination", criterion_7),
    8: ("variance-proxy tightness", criterion_8),
    9: ("CI coverage", criterion_9),
    10: ("ratio CLT", criterion_10),
    11: ("Karlin asymptotics", criterion_11),
    12: ("index consistency and species forecast", criterion_12),
    13: ("light-tail pathology", criterion_13),
    14: ("determinism", criterion_14),
}


def run_acceptance(
    seed: int = 0,
    R: int = 10_000,
    jobs: int = 1,
    only: Optional[Sequence[int]] = None,
    echo: Optional[Callable[[str], None]] = None,
) -> list:
    """Run the selected criteria in order and return their results."""
    run = AcceptanceRun(seed=seed, R=R, jobs=jobs)
    out = []
    for k in sorted(only or CRITERIA):
        t0 = time.perf_counter()
        res = CRITERIA[k][1](run)
        res.seconds = time.perf_counter() - t0
        out.append(res)
        if echo is not None:
            echo(res.line())
    return out
