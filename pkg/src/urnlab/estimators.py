"""Estimators that only look at an occupancy profile.

Nothing here imports or accepts a frequency model: the Good-Turing masses,
the confidence interval for the Poissonised missing mass, the index
estimates ``r K_r / K_{>=r}`` and the species forecasts all use observable
counts.  The two helpers at the end (``gt_mm_covariance_poisson`` and
``clt_normalizer``) take expected counts from a moment report and are used
to standardise simulated estimates.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .moments import MomentReport
from .sampler import OccupancyProfile

__all__ = [
    "EstimateWithCI",
    "good_turing",
    "gt_ci_poisson",
    "gt_ci_endpoints",
    "alpha_hat",
    "species_estimate",
    "GapCovariance",
    "gt_mm_covariance_poisson",
    "clt_normalizer",
    "REGIMES",
]

REGIMES = ("coverage", "singletons", "level", "slow")


@dataclass(frozen=True)
class EstimateWithCI:
    """Point estimate with an interval and the failure budget behind it."""

    name: str
    point: float
    lower: float
    upper: float
    delta: float
    coverage_target: float
    inputs_digest: str
    clipped_lower: bool = False
    clipped_upper: bool = False

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _denominator(profile: OccupancyProfile) -> float:
    # In the Poisson setting the intensity replaces the realised size, which
    # keeps E G_0(t) = E M_0(t) exact.
    if profile.setting == "poisson":
        if profile.t is None:
            raise ValueError("Poisson profile without an intensity")
        return float(profile.t)
    return float(profile.n)


def good_turing(profile: OccupancyProfile, r: int = 0) -> float:
    """``(r + 1) K_{r+1} / n`` estimate of the mass of symbols seen ``r`` times.

    Examples
    --------
    >>> p = OccupancyProfile.from_counts({1: 1, 2: 1, 3: 1, 4: 7})
    >>> good_turing(p, 0)
    0.3
    """
    if r < 0:
        raise ValueError("occupancy level must be >= 0")
    denom = _denominator(profile)
    if denom <= 0:
        raise ValueError("Good-Turing needs a positive sample size")
    return (r + 1) * profile.K_r(r + 1) / denom


def gt_ci_poisson(profile: OccupancyProfile, t: Optional[float], delta: float) -> EstimateWithCI:
    """Interval for ``M_0(t)`` holding with probability at least ``1 - 4 delta``.

    With ``L = log(1/delta)``,

    * upper: ``G_0 + (sqrt(6 K L) + 5 L) / t``,
    * lower: ``G_0 - (sqrt(2 (K_1 + 2 K_2) L) + 4 L) / t``,

    computed from the observed counts and clipped to ``[0, 1]``.
    """
    if t is None:
        t = profile.t
    if t is None or t <= 0:
        raise ValueError("the interval needs the Poisson intensity t > 0")
    g0 = profile.K_r(1) / t
    lower, upper = gt_ci_endpoints(profile.K, profile.K_r(1), profile.K_r(2), t, delta)
    return EstimateWithCI(
        name="missing_mass_poisson_ci",
        point=g0,
        lower=max(0.0, lower),
        upper=min(1.0, upper),
        delta=delta,
        coverage_target=1.0 - 4.0 * delta,
        inputs_digest=profile.digest(),
        clipped_lower=lower < 0.0,
        clipped_upper=upper > 1.0,
    )


def gt_ci_endpoints(k, k1, k2, t: float, delta: float):
    """Unclipped interval endpoints from counts ``K, K_1, K_2``; works on arrays."""
    if not 0.0 < delta < 0.25:
        raise ValueError("delta must lie in (0, 1/4); otherwise 1 - 4 delta is vacuous")
    L = math.log(1.0 / delta)
    k, k1, k2 = (np.asarray(v, dtype=float) for v in (k, k1, k2))
    g0 = k1 / t
    upper = g0 + (np.sqrt(6.0 * k * L) + 5.0 * L) / t
    lower = g0 - (np.sqrt(2.0 * (k1 + 2.0 * k2) * L) + 4.0 * L) / t
    if upper.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def alpha_hat(profile: OccupancyProfile, r: int = 1) -> Optional[float]:
    """``r K_r / K_{>=r}``; ``None`` when no symbol reaches level ``r``."""
    if r < 1:
        raise ValueError("level must be >= 1")
    kbar = profile.Kbar(r)
    if kbar == 0:
        return None
    return r * profile.K_r(r) / kbar


def species_estimate(
    profile: OccupancyProfile,
    tau: float,
    alpha: Optional[float] = None,
    r_used: int = 1,
    regime: str = "singletons",
) -> float:
    """Forecast of ``K_{tau n} - K_n``, the symbols discovered by growing the sample ``tau``-fold.

    Parameters
    ----------
    profile : OccupancyProfile
    tau : float
        Growth factor, ``tau > 1``.
    alpha : float, optional
        Index estimate in ``(0, 1]``; defaults to ``alpha_hat(profile, r_used)``.
        Not used by the ``"slow"`` regime.
    r_used : int
        Level whose count drives the forecast in the ``"level"`` and
        ``"slow"`` regimes.
    regime : {"coverage", "singletons", "level", "slow"}
        ``coverage``: ``(tau^a - 1) K_n``; ``singletons``:
        ``(tau^a - 1)/a K_1``; ``level``:
        ``prod_{k=2}^r k/(k-1-a) (tau^a - 1)/a K_r``; ``slow``:
        ``log(tau) r K_r``.

    Raises
    ------
    ValueError
        For ``tau <= 1`` or an index outside ``(0, 1]``.  Also for the
        singular product at ``a = 1`` with ``r >= 2``, where the ``k = 2``
        factor divides by zero.
    """
    if tau <= 1.0:
        raise ValueError("growth factor must exceed 1")
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}")
    if regime == "slow":
        return math.log(tau) * r_used * profile.K_r(r_used)
    if alpha is None:
        alpha = alpha_hat(profile, r_used)
        if alpha is None:
            raise ValueError(f"no symbol reaches level {r_used}; cannot estimate the index")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"power-regime forecasts need an index in (0, 1], got {alpha}")
    growth = tau**alpha - 1.0
    if regime == "coverage":
        return growth * profile.K
    if regime == "singletons":
        return growth / alpha * profile.K_r(1)
    if r_used < 2:
        return growth / alpha * profile.K_r(1)
    factor = 1.0
    for k in range(2, r_used + 1):
        denom = k - 1.0 - alpha
        if denom <= 0.0:
            raise ValueError("singular product at index 1; use the singleton form instead")
        factor *= k / denom
    return factor * growth / alpha * profile.K_r(r_used)


@dataclass(frozen=True)
class GapCovariance:
    """Covariance entries of ``(G_0(t), M_0(t))`` in the Poisson setting."""

    var_G: float
    var_M: float
    cov_GM: float

    @property
    def var_gap(self) -> float:
        return self.var_G + self.var_M - 2.0 * self.cov_GM


def gt_mm_covariance_poisson(report: MomentReport, t: float, ek2_double: float) -> GapCovariance:
    """Entries of the covariance matrix of ``(G_0(t), M_0(t))``.

    With ``b = E K_2(2t) / (2 t^2)``:
    ``var G_0 = E K_1(t)/t^2 - b``, ``var M_0 = 2 E K_2(t)/t^2 - b`` and
    ``cov(G_0, M_0) = -b``.  ``ek2_double`` is ``E K_2(2t)``, which a report
    at a single intensity cannot provide.
    """
    if report.setting.kind != "poisson" or report.setting.size != t:
        raise ValueError("covariances need a Poisson report at intensity t")
    t2 = float(t) ** 2
    k1, k2 = report.k(1), report.k(2)
    b = ek2_double / (2.0 * t2)
    return GapCovariance(var_G=k1 / t2 - b, var_M=2.0 * k2 / t2 - b, cov_GM=-b)


def clt_normalizer(report: MomentReport, t: float) -> float:
    """``E K_1(t) / sqrt(E K_1(t) + 2 E K_2(t))``, the scale of ``G_0/M_0 - 1``."""
    if report.setting.kind != "poisson" or report.setting.size != t:
        raise ValueError("the normaliser uses Poisson counts at intensity t")
    k1, k2 = report.k(1), report.k(2)
    denom = math.sqrt(k1 + 2.0 * k2)
    if denom == 0.0:
        raise ValueError("no singletons or doubletons expected; the ratio is degenerate")
    return k1 / denom
