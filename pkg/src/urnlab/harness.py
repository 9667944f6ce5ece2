"""Seeded Monte Carlo checks of the moment formulas, bounds and estimators.

Replicate ``i`` of a run with master seed ``seed`` always uses the generator
``make_rng(seed, i)``, and per-replicate summaries are stored by index, so a
run split over any number of worker processes gives the same arrays.

A tail verdict passes when the empirical exceedance frequency is at most
``b + 3 sqrt(b (1 - b) / R)`` where ``b`` is the bound on the probability.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from . import bounds as bnd
from .estimators import gt_ci_endpoints, clt_normalizer
from .models import FrequencyModel, Geometric, PoissonPmf
from .moments import (
    Setting,
    expected_mass,
    karlin_asymptotics,
    moment_report,
    slow_variation_certificate,
    variance_proxies,
)
from .sampler import make_rng, max_symbol_index, sample_binomial, sample_poisson, true_mass

__all__ = [
    "ExactLaw",
    "enumerate_binomial",
    "poisson_gap_log_mgf",
    "COLUMNS",
    "ReplicateStats",
    "run_replicates",
    "Verdict",
    "McReport",
    "tail_verdict",
    "check_tail_bounds",
    "check_ci_coverage",
    "check_clt",
    "search_n0",
    "experiment_lighttail",
    "experiment_asymptotics",
    "DEFAULT_S_GRID",
]

DEFAULT_S_GRID = (0.5, 1.0, 2.0, 3.0)
RMAX = 10
COLUMNS = (
    ("N", "K")
    + tuple(f"K_{r}" for r in range(1, RMAX + 1))
    + ("M_0", "M_1", "M_2", "G_0", "G_1", "max_index")
)
_COL = {name: i for i, name in enumerate(COLUMNS)}


# ---------------------------------------------------------------------------
# exhaustive enumeration for small instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExactLaw:
    """Distribution of the occupancy vector of ``n`` draws over a small support."""

    probs: np.ndarray
    n: int
    weights: np.ndarray
    counts: np.ndarray

    @property
    def K(self) -> np.ndarray:
        return (self.counts > 0).sum(axis=1)

    def K_r(self, r: int) -> np.ndarray:
        return (self.counts == r).sum(axis=1)

    def Kbar(self, r: int) -> np.ndarray:
        return (self.counts >= r).sum(axis=1)

    def M(self, r: int) -> np.ndarray:
        return (self.counts == r) @ self.probs

    def mean(self, x: np.ndarray) -> float:
        return math.fsum(self.weights * x)

    def var(self, x: np.ndarray) -> float:
        mu = self.mean(x)
        return math.fsum(self.weights * (x - mu) ** 2)

    def log_mgf(self, x: np.ndarray, lam: float) -> float:
        """``log E exp(lam (X - E X))``."""
        mu = self.mean(x)
        return float(special.logsumexp(lam * (x - mu), b=self.weights))


def enumerate_binomial(probs: Sequence[float], n: int) -> ExactLaw:
    """All ``k**n`` ordered outcomes of ``n`` draws from ``probs``."""
    p = np.asarray(probs, dtype=float)
    k = p.size
    if k**n > 2_000_000:
        raise ValueError("instance too large for exhaustive enumeration")
    if n == 0:
        return ExactLaw(p, 0, np.ones(1), np.zeros((1, k), dtype=np.int64))
    seqs = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64)
    weights = np.prod(p[seqs], axis=1)
    counts = np.zeros((seqs.shape[0], k), dtype=np.int64)
    for col in range(n):
        np.add.at(counts, (np.arange(seqs.shape[0]), seqs[:, col]), 1)
    return ExactLaw(p, n, weights, counts)


def poisson_gap_log_mgf(probs: Sequence[float], t: float, lam: float) -> float:
    """Exact ``log E exp(lam (G_0(t) - M_0(t)))`` for a finite model.

    Under Poissonisation each symbol is independently absent (the gap moves
    by ``-p``), a singleton (``+1/t``) or seen at least twice (``0``).
    """
    p = np.asarray(probs, dtype=float)
    a = np.exp(-t * p)
    b = t * p * a
    c = np.clip(1.0 - a - b, 0.0, None)
    mean = math.fsum(b / t - a * p)
    terms = np.log(a * np.exp(-lam * p) + b * math.exp(lam / t) + c)
    return math.fsum(terms) - lam * mean


# ---------------------------------------------------------------------------
# replicate engine
# ---------------------------------------------------------------------------


def _summary(model: FrequencyModel, setting: Setting, rng: np.random.Generator) -> np.ndarray:
    if setting.kind == "binomial":
        prof = sample_binomial(model, int(setting.size), rng)
        denom = float(prof.n)
    else:
        prof = sample_poisson(model, setting.size, rng)
        denom = float(setting.size)
    kr = prof.K_r_vector(RMAX)
    top = max_symbol_index(prof)
    row = np.empty(len(COLUMNS))
    row[0] = prof.n
    row[1] = prof.K
    row[2 : 2 + RMAX] = kr
    row[_COL["M_0"]] = true_mass(model, prof, 0)
    row[_COL["M_1"]] = true_mass(model, prof, 1)
    row[_COL["M_2"]] = true_mass(model, prof, 2)
    row[_COL["G_0"]] = kr[0] / denom if denom > 0 else 0.0
    row[_COL["G_1"]] = 2.0 * kr[1] / denom if denom > 0 else 0.0
    if top is None:
        row[_COL["max_index"]] = 0.0
    else:
        try:
            row[_COL["max_index"]] = float(top)
        except OverflowError:
            row[_COL["max_index"]] = math.inf
    return row


def _block(args) -> np.ndarray:
    model, setting, seed, start, stop = args
    return np.array([_summary(model, setting, make_rng(seed, i)) for i in range(start, stop)]).reshape(
        stop - start, len(COLUMNS)
    )


@dataclass(frozen=True, eq=False)
class ReplicateStats:
    """Per-replicate summaries, one row per replicate in index order."""

    model: str
    setting: Setting
    R: int
    seed: int
    data: np.ndarray

    def column(self, name: str) -> np.ndarray:
        if name.startswith("Kbar_"):
            r = int(name[5:])
            return self.kbar(r)
        return self.data[:, _COL[name]]

    def kbar(self, r: int) -> np.ndarray:
        if not 1 <= r <= RMAX + 1:
            raise ValueError(f"cumulative counts are tracked for r <= {RMAX + 1}")
        below = self.data[:, 2 : 2 + r - 1].sum(axis=1)
        return self.data[:, 1] - below

    def mean(self, name: str) -> float:
        return float(np.mean(self.column(name)))

    def var(self, name: str) -> Optional[float]:
        if self.R < 2:
            return None
        return float(np.var(self.column(name), ddof=1))

    def stderr(self, name: str) -> Optional[float]:
        v = self.var(name)
        return None if v is None else math.sqrt(v / self.R)

    def describe(self, names: Sequence[str] = COLUMNS) -> dict:
        return {
            name: {"mean": self.mean(name), "var": self.var(name), "stderr": self.stderr(name)}
            for name in names
            if name != "max_index"
        }

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.data).tobytes()).hexdigest()[:16]


def run_replicates(
    model: FrequencyModel, setting: Setting, R: int, seed: int, jobs: int = 1
) -> ReplicateStats:
    """Draw ``R`` independent samples and summarise each one.

    Summaries hold ``N``, ``K``, ``K_1..K_10``, the true masses ``M_0..M_2``,
    the Good-Turing estimates ``G_0, G_1`` and the largest occupied index.
    ``jobs > 1`` fans contiguous index blocks out to worker processes; the
    result does not depend on ``jobs``.
    """
    if R < 1:
        raise ValueError("need at least one replicate")
    jobs = max(1, int(jobs))
    if jobs == 1 or R < 2 * jobs:
        data = _block((model, setting, seed, 0, R))
    else:
        nblocks = min(R, 4 * jobs)
        edges = np.linspace(0, R, nblocks + 1).astype(int)
        tasks = [(model, setting, seed, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            data = np.concatenate(list(pool.map(_block, tasks)), axis=0)
    return ReplicateStats(model.spec, setting, R, seed, data)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    """One machine-checkable comparison.

    ``kind`` is ``"upper"`` when ``empirical <= bound + slack`` passes and
    ``"lower"`` when ``empirical >= bound - slack`` passes.
    """

    name: str
    bound: float
    empirical: float
    slack: float
    kind: str = "upper"
    required: bool = True
    s: Optional[float] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        if self.kind == "upper":
            return self.empirical <= self.bound + self.slack
        return self.empirical >= self.bound - self.slack

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "s": self.s,
            "kind": self.kind,
            "bound": self.bound,
            "empirical": self.empirical,
            "slack": self.slack,
            "passed": self.passed,
            "required": self.required,
            "detail": self.detail,
        }


def tail_verdict(name: str, exceed: np.ndarray, prob_bound: float, s: float, required: bool = True, detail: str = "") -> Verdict:
    R = exceed.size
    b = min(1.0, prob_bound)
    return Verdict(
        name=name,
        bound=b,
        empirical=float(np.mean(exceed)),
        slack=3.0 * math.sqrt(b * (1.0 - b) / R),
        kind="upper",
        required=required,
        s=s,
        detail=detail,
    )


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _clean(dataclasses.asdict(obj))
    return obj


@dataclass
class McReport:
    """Statistics and verdicts of one experiment."""

    experiment: str
    model: str
    setting: str
    R: int
    seed: int
    quantities: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts if v.required)

    def to_dict(self) -> dict:
        return _clean(
            {
                "experiment": self.experiment,
                "model": self.model,
                "setting": self.setting,
                "R": self.R,
                "seed": self.seed,
                "passed": self.passed,
                "quantities": self.quantities,
                "verdicts": [v.to_dict() for v in self.verdicts],
                "extra": self.extra,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment", "model", "setting", "check", "s", "bound", "empirical", "slack", "passed", "required"])
        for v in self.verdicts:
            w.writerow(
                [self.experiment, self.model, self.setting, v.name, _fmt(v.s), _fmt(v.bound),
                 _fmt(v.empirical), _fmt(v.slack), int(v.passed), int(v.required)]
            )
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def search_n0(model: FrequencyModel, n_grid: Sequence[int]) -> tuple:
    """Smallest grid point from which the slow-variation certificate holds.

    The certificate at ``n`` is ``max_{r>=2} E K_r(n) <= 6 a(n)``.  Returns
    ``(n0, table)`` where ``n0`` is ``None`` if the certificate fails at the
    largest grid point or the model has no diverging auxiliary function.
    """
    grid = sorted(int(n) for n in n_grid)
    table = []
    for n in grid:
        cert = slow_variation_certificate(model, n)
        table.append({"n": n, "certificate": cert, "holds": cert is not None and cert <= 6.0})
    n0 = None
    for row in reversed(table):
        if not row["holds"]:
            break
        n0 = row["n"]
    return n0, table


def check_tail_bounds(
    model: FrequencyModel,
    setting: Setting,
    R: int,
    seed: int,
    s_grid: Sequence[float] = DEFAULT_S_GRID,
    n0: int = 1000,
    rs: Sequence[int] = (1, 2, 3),
    jobs: int = 1,
    replicates: Optional[ReplicateStats] = None,
) -> McReport:
    """Compare empirical exceedance frequencies with every declared tail bound.

    Binomial setting: missing-mass left (``v_n^-``) and right (``v_n^+``,
    plus ``12 a(n)/n^2`` when the model has a diverging auxiliary function,
    required only when ``n >= n0`` and the certificate holds) bounds, the
    two-sided ``K_{n,r}`` bounds with multiplier 4, and the log-Sobolev
    proxy ``w_n`` (reported, not required).  Poisson setting with integer
    ``t``: the missing-mass bounds at ``n = t`` and both Good-Turing gap
    bounds.
    """
    stats_ = replicates if replicates is not None else run_replicates(model, setting, R, seed, jobs)
    R = stats_.R
    n = int(round(setting.size))
    report = McReport("tail_bounds", model.spec, setting.label, R, seed)
    if n < 1:
        report.extra["note"] = "empty samples; nothing to check"
        return report
    vrep = variance_proxies(model, n, n0=n0)
    m0 = stats_.column("M_0")
    em0 = expected_mass(model, setting, 0).value
    dev = m0 - em0
    left, right = bnd.missing_mass_bounds(vrep, n)
    checks = [("M0 left v_minus", left, -dev, True)]
    right_plus = bnd.SubGammaBound(v=vrep.v_plus, c=1.0 / n, side="right", quantity="M_n,0",
                                   reference="right tail, sub-gamma with variance 2 E K_>=2(n)/n^2")
    checks.append(("M0 right v_plus", right_plus, dev, True))
    if vrep.v_slow is not None:
        slow = bnd.SubGammaBound(v=vrep.v_slow, c=1.0 / n, side="right", quantity="M_n,0",
                                 reference="right tail under slow variation, variance 12 a(n)/n^2")
        checks.append(("M0 right v_slow", slow, dev, vrep.slow_applies))
    checks.append(("M0 left w_n", bnd.log_sobolev_bound(vrep, "left"), -dev, False))
    checks.append(("M0 right w_n", bnd.log_sobolev_bound(vrep, "right"), dev, False))

    if setting.kind == "binomial":
        mrep = moment_report(model, setting, R=max(rs) + 1)
        for r in rs:
            kb = bnd.knr_bound(mrep, n, r)
            absdev = np.abs(stats_.column(f"K_{r}") - mrep.k(r))
            for s in s_grid:
                exceed = absdev >= kb.radius(s)
                report.verdicts.append(
                    tail_verdict(f"K_{r} two-sided", exceed, kb.probability(s), s,
                                 detail=f"v_n,r={kb.v:.17g}, radius={kb.radius(s):.17g}")
                )
    else:
        mrep = moment_report(model, setting, R=2)
        lower, upper = bnd.gt_gap_bounds(mrep, setting.size)
        gap = stats_.column("G_0") - stats_.column("M_0")
        checks.append(("G0-M0 upper", upper, gap, True))
        checks.append(("M0-G0 upper", lower, -gap, True))

    bound_dicts = []
    for name, bound, excess, required in checks:
        bound_dicts.append({"check": name, **bound.to_dict()})
        for s in s_grid:
            rad = bound.radius(s)
            exceed = excess > rad
            report.verdicts.append(
                tail_verdict(name, exceed, bound.probability(s), s, required,
                             detail=f"v={bound.v:.17g}, c={bound.c:.17g}, radius={rad:.17g}")
            )
    var_mc = stats_.var("M_0")
    report.quantities = stats_.describe(("K", "K_1", "K_2", "K_3", "M_0", "G_0"))
    tight = {}
    if var_mc:
        tight = {"v_minus/var_MC": vrep.v_minus / var_mc, "v_plus/var_MC": vrep.v_plus / var_mc,
                 "w_n/var_MC": vrep.w_n / var_mc}
        if vrep.v_slow is not None:
            tight["v_slow/var_MC"] = vrep.v_slow / var_mc
    report.extra = {
        "E_M0": em0,
        "bounds": bound_dicts,
        "variance": {"v_minus": vrep.v_minus, "v_plus": vrep.v_plus, "v_slow": vrep.v_slow,
                     "w_n": vrep.w_n, "slow_certificate": vrep.slow_certificate,
                     "slow_applies": vrep.slow_applies, "n0": n0, "var_MC_M0": var_mc},
        "tightness": tight,
        "v_plus_loose": bool(vrep.v_minus > 0 and vrep.v_plus / vrep.v_minus >= 3.0),
        "s_grid": list(s_grid),
        "replicate_digest": stats_.digest(),
    }
    return report


def check_ci_coverage(
    model: FrequencyModel,
    t: float,
    delta: float,
    R: int,
    seed: int,
    jobs: int = 1,
    replicates: Optional[ReplicateStats] = None,
) -> McReport:
    """Fraction of Poisson replicates whose interval for ``M_0(t)`` covers the truth."""
    setting = Setting.poisson(t)
    stats_ = replicates if replicates is not None else run_replicates(model, setting, R, seed, jobs)
    lo, hi = gt_ci_endpoints(stats_.column("K"), stats_.column("K_1"), stats_.column("K_2"), t, delta)
    lo, hi = np.maximum(lo, 0.0), np.minimum(hi, 1.0)
    m0 = stats_.column("M_0")
    covered = (lo <= m0) & (m0 <= hi)
    target = 1.0 - 4.0 * delta
    cov = float(np.mean(covered))
    report = McReport("ci_coverage", model.spec, setting.label, stats_.R, seed)
    report.verdicts.append(
        Verdict("coverage", target, cov, 3.0 * math.sqrt(target * (1.0 - target) / stats_.R), kind="lower",
                detail=f"delta={delta!r}")
    )
    report.quantities = {"coverage": cov, "miss_below": float(np.mean(m0 < lo)),
                         "miss_above": float(np.mean(m0 > hi)),
                         "mean_width": float(np.mean(hi - lo))}
    report.extra = {"delta": delta, "coverage_target": target, "replicate_digest": stats_.digest()}
    return report


def check_clt(
    model: FrequencyModel,
    t: float,
    R: int,
    seed: int,
    jobs: int = 1,
    replicates: Optional[ReplicateStats] = None,
    level: float = 0.01,
) -> McReport:
    """Kolmogorov-Smirnov test of the standardised ratio ``G_0/M_0 - 1`` against N(0, 1)."""
    setting = Setting.poisson(t)
    report = McReport("clt", model.spec, setting.label, R, seed)
    mrep = moment_report(model, setting, R=2)
    if mrep.m(0) <= 0.0 or mrep.k(1) + 2.0 * mrep.k(2) <= 0.0:
        report.extra["note"] = "missing mass is identically zero; ratio undefined, verdict skipped"
        return report
    stats_ = replicates if replicates is not None else run_replicates(model, setting, R, seed, jobs)
    report.R = stats_.R
    m0, g0 = stats_.column("M_0"), stats_.column("G_0")
    ok = m0 > 0
    if np.count_nonzero(ok) < 2:
        report.extra = {"note": "fewer than two replicates with positive missing mass; verdict skipped",
                        "replicate_digest": stats_.digest()}
        report.quantities = {"dropped_zero_mass": int(np.count_nonzero(~ok))}
        return report
    z = clt_normalizer(mrep, t) * (g0[ok] / m0[ok] - 1.0)
    res = stats.kstest(z, "norm", method="asymp")
    report.verdicts.append(Verdict("KS p-value", level, float(res.pvalue), 0.0, kind="lower",
                                   detail=f"KS distance {float(res.statistic):.17g}"))
    report.quantities = {"ks_statistic": float(res.statistic), "p_value": float(res.pvalue),
                         "mean_z": float(np.mean(z)), "var_z": float(np.var(z, ddof=1)) if z.size > 1 else None,
                         "dropped_zero_mass": int(np.count_nonzero(~ok))}
    report.extra = {"normalizer": clt_normalizer(mrep, t), "replicate_digest": stats_.digest()}
    return report


def experiment_lighttail(
    q: float,
    n_grid: Sequence[int],
    R: int,
    seed: int,
    lam: float = 1.0,
    n_twopoint: int = 100_000,
    n_max_check: int = 100,
    jobs: int = 1,
) -> McReport:
    """Light-tail diagnostics.

    (a) geometric ``p_j = q (1-q)^{j-1}`` at ``n = n_max_check``: the mean of
        ``max index - K_n`` lies in ``[0, (1-q)/q^2]``;
    (b) symbols ranked by the Poisson(``lam``) pmf at ``n = n_twopoint``: the
        two most frequent values of ``M_{n,0}`` carry at least 0.95 of the
        replicates;
    (c) geometric with decay ratio ``q``, that is ``p_j = (1-q) q^{j-1}``:
        frequency of ``G_{n,0} = 0`` while ``M_{n,0} > 0`` along ``n_grid``.
        The same frequency under ``p_j = q (1-q)^{j-1}`` is reported beside it.
    """
    report = McReport("lighttail", f"geom:q={q!r}", "binomial", R, seed)
    geo = Geometric(q)
    st = run_replicates(geo, Setting.binomial(n_max_check), R, seed, jobs)
    d = st.column("max_index") - st.column("K")
    mean_d = float(np.mean(d))
    se_d = float(np.std(d, ddof=1) / math.sqrt(R)) if R > 1 else 0.0
    cap = (1.0 - q) / q**2
    report.verdicts.append(Verdict("(a) E max - E K >= 0", 0.0, mean_d, 3.0 * se_d, kind="lower"))
    report.verdicts.append(Verdict("(a) E max - E K <= (1-q)/q^2", cap, mean_d, 3.0 * se_d, kind="upper"))

    pmf = PoissonPmf(lam)
    st_b = run_replicates(pmf, Setting.binomial(n_twopoint), R, seed + 1, jobs)
    freq = Counter(st_b.column("M_0").tolist())
    top2 = freq.most_common(2)
    mass2 = sum(c for _, c in top2) / st_b.R
    report.verdicts.append(
        Verdict("(b) two-point mass of M_n,0", 0.95, mass2, 0.0, kind="lower",
                detail=f"model {pmf.spec} n={n_twopoint}")
    )

    ratio_model = Geometric(1.0 - q)
    rows = []
    best = 0.0
    for k, n in enumerate(sorted(int(v) for v in n_grid)):
        cols = {}
        for label, mdl, off in (("ratio", ratio_model, 2), ("success", geo, 3)):
            s_ = run_replicates(mdl, Setting.binomial(n), R, seed + 1000 * off + k, jobs)
            fail = (s_.column("G_0") == 0) & (s_.column("M_0") > 0)
            cols[label] = float(np.mean(fail))
        rows.append({"n": n, "freq_ratio_form": cols["ratio"], "freq_success_form": cols["success"]})
        best = max(best, cols["ratio"])
    # a nonzero frequency means at least one replicate out of R
    report.verdicts.append(
        Verdict("(c) P(G_n,0 = 0, M_n,0 > 0) > 0 at some n", 1.0 / R, best, 0.0, kind="lower",
                detail=f"model {ratio_model.spec}")
    )
    report.quantities = {
        "a_mean_max_minus_K": mean_d,
        "a_stderr": se_d,
        "a_cap": cap,
        "b_two_point_mass": mass2,
        "b_values": [[v, c] for v, c in top2],
        "c_rows": rows,
    }
    report.extra = {"models": {"a": geo.spec, "b": pmf.spec, "c": ratio_model.spec, "c_reference": geo.spec}}
    return report


def experiment_asymptotics(
    model: FrequencyModel,
    n_grid: Sequence[int],
    seed: int,
    rs: Sequence[int] = (1, 2, 3),
    realize: bool = True,
) -> McReport:
    """Exact binomial moments against their regular-variation equivalents along ``n_grid``.

    Verdicts are taken at the largest ``n``: within 5% for ``0 < alpha < 1``
    (``E K_n``, ``E K_{n,1}``, ``E K_{n,2}``, ``E K_{n,>=2}``), within 15%
    for ``alpha = 1`` (same quantities) and within 20% for
    ``r E K_{n,r} / a(n)`` when ``alpha = 0`` with a diverging ``a``.
    """
    meta = model.rv_meta
    if meta is None:
        raise ValueError(f"{model.spec} carries no regular-variation metadata")
    grid = sorted(int(n) for n in n_grid)
    report = McReport("asymptotics", model.spec, "binomial", 1, seed)
    rows = []
    rmax = max(max(rs), 2)
    for k, n in enumerate(grid):
        setting = Setting.binomial(n)
        mrep = moment_report(model, setting, R=rmax + 1)
        row = {"n": n, "EK": mrep.EK.value}
        preds = {r: karlin_asymptotics(meta, n, r) for r in range(1, rmax + 1)}
        row["pred_EK"] = preds[1].EK
        row["ratio_EK"] = mrep.EK.value / preds[1].EK if preds[1].EK else None
        for r in range(1, rmax + 1):
            p = preds[r]
            row[f"EK_{r}"] = mrep.k(r)
            row[f"EKbar_{r}"] = mrep.kbar(r)
            row[f"pred_EK_{r}"] = p.EK_r
            row[f"pred_EKbar_{r}"] = p.EKbar_r
            row[f"ratio_EK_{r}"] = mrep.k(r) / p.EK_r if p.EK_r else None
            row[f"ratio_EKbar_{r}"] = mrep.kbar(r) / p.EKbar_r if p.EKbar_r else None
        if realize:
            st = run_replicates(model, setting, 1, seed + k, 1)
            row["realized_K"] = st.mean("K")
            for r in range(1, rmax + 1):
                row[f"realized_K_{r}"] = st.mean(f"K_{r}")
        rows.append(row)
    last = rows[-1]
    if 0.0 < meta.alpha < 1.0:
        regime, tol = "regular", 0.05
        names = ["ratio_EK", "ratio_EK_1", "ratio_EK_2", "ratio_EKbar_2"]
    elif meta.alpha == 1.0:
        regime, tol = "fast", 0.15
        names = ["ratio_EK", "ratio_EK_1", "ratio_EK_2", "ratio_EKbar_2"]
    elif meta.a_diverges:
        regime, tol = "slow", 0.20
        names = [f"ratio_EK_{r}" for r in rs]
    else:
        regime, tol = "slow-bounded", None
        names = []
    for name in names:
        val = last[name]
        report.verdicts.append(Verdict(f"|{name} - 1| at n={last['n']}", tol, abs(val - 1.0), 0.0, kind="upper",
                                       detail=f"ratio={val:.17g}"))
    report.quantities = {"rows": rows}
    report.extra = {"regime": regime, "alpha": meta.alpha, "ell": meta.ell_description, "tolerance": tol}
    return report
