"""Log-Laplace and tail bounds for occupancy counts and the missing mass.

Bounds are plain data: a variance factor ``v``, a scale factor ``c``, the
tail they control and the confidence multiplier in front of ``exp(-s)``.
Reports therefore serialise exactly the certificate that a Monte Carlo run
was checked against.

Conventions
-----------
A ``right`` bound on ``Z`` states

    log E exp(lam (Z - E Z)) <= v lam^2 / (2 (1 - c lam)),   0 <= lam < 1/c,

and ``P{Z > E Z + sqrt(2 v s) + c s} <= multiplier * exp(-s)``.  A ``left``
bound is sub-Gaussian,

    log E exp(lam (Z - E Z)) <= v lam^2 / 2,   lam <= 0,

with ``P{Z < E Z - sqrt(2 v s)} <= multiplier * exp(-s)``; its radius never
involves ``c``.  A lower-tail statement with a genuine scale factor is stored
as a ``right`` bound on the negated quantity (for instance ``M0 - G0``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .models import FrequencyModel
from .moments import Certified, MomentReport, Setting, VarianceReport, expected_occupancy

__all__ = [
    "phi",
    "SubGammaBound",
    "KnrBound",
    "tail_radius",
    "knr_bound",
    "knrbar_variance",
    "knrbar_log_laplace",
    "missing_mass_bounds",
    "log_sobolev_bound",
    "missing_mass_log_laplace_series",
    "gt_gap_bounds",
    "gt_gap_bennett",
]

_SERIES_CUTOFF = 1e-4


def phi(lam):
    """``exp(lam) - lam - 1``, accurate near zero.

    Examples
    --------
    >>> round(phi(1.0), 6)
    0.718282
    """
    x = np.asarray(lam, dtype=float)
    small = np.abs(x) < _SERIES_CUTOFF
    with np.errstate(over="ignore"):
        out = np.where(small, x * x * (0.5 + x * (1.0 / 6.0 + x / 24.0)), np.expm1(x) - x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SubGammaBound:
    """Variance and scale factors of a one-sided concentration certificate.

    Attributes
    ----------
    v : float
        Variance factor, in squared units of the bounded quantity.
    c : float
        Scale factor.  Ignored by ``left`` (sub-Gaussian) bounds.
    side : str
        ``"left"``, ``"right"`` or ``"both"`` (a two-sided statement about
        ``|Z - E Z|``).
    multiplier : float
        Constant in front of ``exp(-s)`` in the tail statement.
    quantity : str
        Name of the bounded random variable.
    reference : str
        Which result the certificate comes from.
    """

    v: float
    c: float = 0.0
    side: str = "right"
    multiplier: float = 1.0
    quantity: str = ""
    reference: str = ""

    def __post_init__(self):
        if self.side not in ("left", "right", "both"):
            raise ValueError(f"side must be left, right or both, got {self.side!r}")
        if not (self.v >= 0.0 and self.c >= 0.0):
            raise ValueError("variance and scale factors must be non-negative")

    def radius(self, s):
        """Deviation radius at exceedance exponent ``s``."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("exceedance exponent must be >= 0")
        r = np.sqrt(2.0 * self.v * s)
        if self.side != "left":
            r = r + self.c * s
        return float(r) if r.ndim == 0 else r

    def probability(self, s) -> float:
        """Bound on the exceedance probability at ``s``, capped at 1."""
        return min(1.0, self.multiplier * math.exp(-s))

    def valid(self, lam: float) -> bool:
        if self.side == "left":
            return lam <= 0.0
        if lam < 0.0:
            return False
        return self.c == 0.0 or lam * self.c < 1.0

    def log_laplace(self, lam: float) -> float:
        """Upper bound on ``log E exp(lam (Z - E Z))`` inside the validity range."""
        if not self.valid(lam):
            raise ValueError(f"lambda={lam} outside the validity range of this {self.side} bound")
        if self.side == "left":
            return 0.5 * self.v * lam * lam
        return 0.5 * self.v * lam * lam / (1.0 - self.c * lam)

    def to_dict(self) -> dict:
        return asdict(self)


def tail_radius(bound: SubGammaBound, s):
    """``sqrt(2 v s) + c s`` for right bounds and ``sqrt(2 v s)`` for left bounds."""
    return bound.radius(s)


@dataclass(frozen=True)
class KnrBound:
    """Two-sided certificate for ``K_{n,r}``.

    ``P{|K_{n,r} - E K_{n,r}| >= sqrt(4 v s) + 2 s / 3} <= 4 exp(-s)``.
    """

    r: int
    v: float

    def radius(self, s):
        s = np.asarray(s, dtype=float)
        out = np.sqrt(4.0 * self.v * s) + 2.0 * s / 3.0
        return float(out) if out.ndim == 0 else out

    @property
    def multiplier(self) -> float:
        return 4.0

    def probability(self, s) -> float:
        return min(1.0, 4.0 * math.exp(-s))

    def as_subgamma(self) -> SubGammaBound:
        # sqrt(4 v s) + 2 s / 3 == sqrt(2 (2 v) s) + (2/3) s
        return SubGammaBound(
            v=2.0 * self.v,
            c=2.0 / 3.0,
            side="both",
            multiplier=4.0,
            quantity=f"K_n,{self.r}",
            reference="two-sided occupancy count bound via K_n,>=r and K_n,>=r+1",
        )


def knr_bound(report: MomentReport, n: int, r: int) -> KnrBound:
    """Certificate for ``K_{n,r}`` from a binomial moment report.

    ``v_{n,r} = 2 min(max(r E K_{n,r}, (r+1) E K_{n,r+1}), E K_{n,>=r})``.
    The report must hold levels up to ``r + 1``.
    """
    if report.setting.kind != "binomial" or report.setting.size != n:
        raise ValueError("knr_bound needs a binomial moment report at the same n")
    if r < 1 or r + 1 > report.R:
        raise ValueError(f"report covers levels 1..{report.R}; need r and r+1")
    v = 2.0 * min(max(r * report.k(r), (r + 1) * report.k(r + 1)), report.kbar(r))
    return KnrBound(r, max(v, 0.0))


def knrbar_variance(report: MomentReport, r: int) -> float:
    """``min(r E K_{n,r}, E K_{n,>=r})``."""
    return min(r * report.k(r), report.kbar(r))


def knrbar_log_laplace(v_bar: float, lam):
    """Sub-Poisson bound ``v_bar * phi(lam)``, valid for every real ``lam``."""
    if v_bar < 0:
        raise ValueError("variance factor must be non-negative")
    return v_bar * phi(lam)


def missing_mass_bounds(report: VarianceReport, n: int) -> tuple:
    """Left and right certificates for the missing mass at sample size ``n``.

    Left: sub-Gaussian with ``v_n^- = 2 E K_2(n) / n^2``.  Right: sub-gamma
    with scale ``1/n`` and variance ``v_n^+ = 2 E K_{>=2}(n) / n^2``, or
    ``12 a(n) / n^2`` when the report says the slow-variation bound applies.
    """
    if report.n != n:
        raise ValueError("variance report was computed at a different n")
    left = SubGammaBound(
        v=report.v_minus, c=0.0, side="left", quantity="M_n,0",
        reference="left tail, sub-Gaussian with the doubleton variance proxy",
    )
    if report.slow_applies:
        right = SubGammaBound(
            v=report.v_slow, c=1.0 / n, side="right", quantity="M_n,0",
            reference="right tail under slow variation, variance 12 a(n)/n^2",
        )
    else:
        right = SubGammaBound(
            v=report.v_plus, c=1.0 / n, side="right", quantity="M_n,0",
            reference="right tail, sub-gamma with variance 2 E K_>=2(n)/n^2",
        )
    return left, right


def log_sobolev_bound(report: VarianceReport, side: str) -> SubGammaBound:
    """Sub-Gaussian certificate with the log-Sobolev proxy ``w_n`` on either tail."""
    return SubGammaBound(
        v=report.w_n, c=0.0, side=side, quantity="M_n,0",
        reference="sub-Gaussian with the Bernoulli log-Sobolev proxy w_n",
    )


def missing_mass_log_laplace_series(
    report: MomentReport,
    n: int,
    lam: float,
    model: Optional[FrequencyModel] = None,
    tol: float = 1e-12,
) -> Certified:
    """Upper bound ``sum_{r>=2} (lam/n)^r E K_r(n)`` on the missing-mass log-Laplace transform.

    ``report`` must be a Poisson report at intensity ``n``.  Levels beyond
    the report are taken from ``model`` when given; the rest of the series is
    bounded by ``E K_{>=2}(n) x^{R+1} / (1 - x)`` with ``x = lam/n``.  The
    returned value includes that remainder, so it is an upper bound in all
    cases, and ``error`` is the remainder itself.
    """
    if report.setting.kind != "poisson" or report.setting.size != n:
        raise ValueError("the series uses Poissonised counts at intensity n")
    if lam < 0:
        raise ValueError("the series bound is stated for lam >= 0")
    if lam >= n:
        raise ValueError(f"series diverges for lam >= n (lam={lam}, n={n})")
    if lam == 0:
        return Certified(0.0, 0.0)
    x = lam / n
    kbar2 = report.kbar(2) if report.R >= 2 else None
    if kbar2 is None:
        raise ValueError("report must cover level 2")
    terms = [x**r * report.k(r) for r in range(2, report.R + 1)]
    R = report.R
    remainder = kbar2 * x ** (R + 1) / (1.0 - x)
    if model is not None:
        setting = Setting.poisson(n)
        while remainder > tol and R < 10_000:
            R += 1
            ek = expected_occupancy(model, setting, R, report.epsilon)
            terms.append(x**R * (ek.value + ek.error))
            remainder = kbar2 * x ** (R + 1) / (1.0 - x)
    return Certified(math.fsum(terms) + remainder, remainder)


def gt_gap_bounds(report: MomentReport, t: float) -> tuple:
    """Certificates for the Good-Turing gap ``G_0(t) - M_0(t)``.

    Returns ``(lower, upper)``.  ``upper`` is a right bound on ``G0 - M0``
    with variance ``(E K_1(t) + 2 E K_2(t)) / t^2`` and scale ``1/t``.
    ``lower`` is a right bound on ``M0 - G0`` with variance
    ``3 E K(t) / t^2`` and scale ``1/t``, which controls the lower tail of
    the gap.
    """
    if report.setting.kind != "poisson" or report.setting.size != t:
        raise ValueError("gap bounds need a Poisson report at intensity t")
    if t <= 0:
        raise ValueError("intensity must be positive")
    v_right = (report.k(1) + 2.0 * report.k(2)) / t**2
    v_left = 3.0 * report.EK.value / t**2
    lower = SubGammaBound(
        v=v_left, c=1.0 / t, side="right", quantity="M0(t)-G0(t)",
        reference="Good-Turing gap, lower tail, variance 3 E K(t)/t^2",
    )
    upper = SubGammaBound(
        v=v_right, c=1.0 / t, side="right", quantity="G0(t)-M0(t)",
        reference="Good-Turing gap, upper tail, variance (E K_1 + 2 E K_2)/t^2",
    )
    return lower, upper


def gt_gap_bennett(report: MomentReport, t: float, lam: float) -> float:
    """Bennett form ``var(G0 - M0) t^2 phi(lam / t)`` of the upper-tail bound, ``lam >= 0``."""
    if lam < 0:
        raise ValueError("the Bennett form is stated for lam >= 0")
    var = (report.k(1) + 2.0 * report.k(2)) / t**2
    return var * t * t * phi(lam / t)
