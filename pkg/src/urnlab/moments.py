"""Occupancy expectations and variances with certified error bars.

Every expectation here is a sum ``sum_j g(p_j)`` over the symbols of a
frequency model.  For finite models the sum is taken exactly.  For infinite
models the head ``j <= J`` is summed directly and the tail is bracketed with
the model's smooth interpolant ``p(x)``.

Each summand is tagged with a threshold ``p_convex`` below which ``g`` is
non-decreasing and ``p g'(p)`` is non-decreasing.  All infinite families
here satisfy ``p''(x) / p'(x)^2 >= 1/p(x)``, so these two facts make
``G(x) = g(p(x))`` convex and non-increasing once ``p(x) <= p_convex``.  The
Hermite-Hadamard inequalities then give

    int_{J+1}^inf G + G(J+1)/2  <=  sum_{j>J} G(j)  <=  int_{J+1/2}^inf G,

a bracket whose width is of order ``|G'(J)|``.  The reported value is its
midpoint and the error is the half width plus the quadrature error
estimates.  ``J`` is doubled until the error meets the tolerance.

The tail integral is evaluated in ``u = log x`` with every summand written as
``g(p) = p^k h(p)`` and ``h`` evaluated stably, so that extremely small
probabilities never underflow into ``0 * inf``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special

from .models import FrequencyModel, RegularVariation, Uniform

__all__ = [
    "Setting",
    "Certified",
    "MomentReport",
    "VarianceReport",
    "PoissonizationGap",
    "KarlinPrediction",
    "certified_sum",
    "expected_occupancy",
    "expected_coverage",
    "expected_cumulative",
    "expected_mass",
    "occupancy_remainder",
    "var_coverage_poisson",
    "var_missing_mass_poisson",
    "var_independent",
    "c_ls",
    "log_sobolev_proxy",
    "slow_variation_certificate",
    "variance_proxies",
    "poissonization_gap",
    "karlin_asymptotics",
    "relative_fluctuation",
    "moment_report",
    "exact_binomial_variances",
    "DEFAULT_EPSILON",
]

DEFAULT_EPSILON = 1e-9
_P_FLOOR = 1e-300
_MAX_HEAD = 2**27
# Variance-type summands behave like a power of p times a function of
# size * p that is close to 1 below this value of size * p; their convexity
# threshold is checked numerically in the test suite.
_SMALL_P = 0.1


@dataclass(frozen=True)
class Setting:
    """Sampling setting: ``binomial`` with sample size ``n`` or ``poisson`` with intensity ``t``."""

    kind: str
    size: float

    def __post_init__(self):
        if self.kind not in ("binomial", "poisson"):
            raise ValueError(f"unknown setting {self.kind!r}")
        if self.size < 0:
            raise ValueError("sample size / intensity must be >= 0")
        if self.kind == "binomial":
            if int(self.size) != self.size:
                raise ValueError("binomial sample size must be an integer")
            object.__setattr__(self, "size", int(self.size))
        else:
            object.__setattr__(self, "size", float(self.size))

    @classmethod
    def binomial(cls, n: int) -> "Setting":
        return cls("binomial", n)

    @classmethod
    def poisson(cls, t: float) -> "Setting":
        return cls("poisson", t)

    def scaled(self, factor: int) -> "Setting":
        return Setting(self.kind, self.size * factor)

    @property
    def label(self) -> str:
        sym = "n" if self.kind == "binomial" else "t"
        return f"{self.kind}({sym}={self.size!r})"


@dataclass(frozen=True)
class Certified:
    """A value together with a certified absolute error bound."""

    value: float
    error: float = 0.0

    def __float__(self) -> float:
        return float(self.value)

    def __add__(self, other: "Certified") -> "Certified":
        return Certified(self.value + other.value, self.error + other.error)

    def __sub__(self, other: "Certified") -> "Certified":
        return Certified(self.value - other.value, self.error + other.error)

    def scale(self, factor: float) -> "Certified":
        return Certified(self.value * factor, self.error * abs(factor))


# ---------------------------------------------------------------------------
# summands
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Summand:
    """``g(p) = p**power * h(p)``; ``g`` and ``p g'(p)`` non-decreasing on ``[0, p_convex]``."""

    g: Callable[[np.ndarray], np.ndarray]
    power: int
    h: Callable[[np.ndarray], np.ndarray]
    p_convex: float


def _log_binom(n: int, r: int) -> float:
    c = special.binom(n, r)
    if np.isfinite(c) and c > 0:
        return math.log(c)
    return -math.log1p(n) - float(special.betaln(n - r + 1, r + 1))


def _binom_scaled(n: int, r: int, extra: int = 0):
    """``h(p) = C(n,r) (1-p)^(n-r)`` as a function of ``p``."""
    logc = _log_binom(n, r)

    def h(p):
        p = np.asarray(p, dtype=float)
        if n == r:
            return np.full_like(p, math.exp(logc))
        with np.errstate(divide="ignore"):
            return np.exp(logc + (n - r) * np.log1p(-p))

    return h


def _binomial_convex_threshold(a: int, b: int, c: int) -> float:
    """Root of ``(a/p - b/(1-p)) (a - c p) = c`` on ``(0, a/c)``.

    For ``g`` proportional to ``p^a (1-p)^(b+1)`` with ``p g'(p)``
    proportional to ``p^a (1-p)^b (a - c p)``, the derivative of ``p g'`` is
    non-negative exactly while the left side exceeds ``c``.
    """

    def psi(p):
        return (a / p - b / (1.0 - p)) * (a - c * p) - c

    hi = min(a / c, 1.0 - 1e-15)
    if psi(hi) >= 0:
        return hi
    return optimize.brentq(psi, 1e-300, hi, xtol=1e-300, rtol=1e-12) * (1.0 - 1e-9)


def _poisson_convex_threshold(a: int) -> float:
    """Smallest root of ``x^2 - (2a+1) x + a^2``: ``x^a e^{-x} (a-x)`` increases below it."""
    return ((2 * a + 1) - math.sqrt(4 * a + 1)) / 2.0


def _binomial_pmf_summand(n: int, r: int, mass: bool) -> _Summand:
    h = _binom_scaled(n, r)
    power = r + 1 if mass else r

    def g(p):
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore", under="ignore"):
            return p**power * h(p)

    if mass:
        p_convex = _binomial_convex_threshold(r + 1, n - r - 1, n + 1)
    else:
        p_convex = _binomial_convex_threshold(r, n - r - 1, n)
    return _Summand(g, power, h, p_convex)


def _poisson_pmf_summand(t: float, r: int, mass: bool) -> _Summand:
    log_norm = r * math.log(t) - math.lgamma(r + 1)
    power = r + 1 if mass else r

    def h(p):
        return np.exp(log_norm - t * np.asarray(p, dtype=float))

    def g(p):
        p = np.asarray(p, dtype=float)
        with np.errstate(under="ignore"):
            return p**power * h(p)

    return _Summand(g, power, h, _poisson_convex_threshold(power) / t)


def _coverage_summand(setting: Setting) -> _Summand:
    size = setting.size
    if setting.kind == "binomial":

        def g(p):
            with np.errstate(divide="ignore"):
                return -np.expm1(size * np.log1p(-np.asarray(p, dtype=float)))

    else:

        def g(p):
            return -np.expm1(-size * np.asarray(p, dtype=float))

    def h(p):
        p = np.maximum(np.asarray(p, dtype=float), _P_FLOOR)
        return g(p) / p

    # p g'(p) is n p (1-p)^(n-1) or t p e^{-tp}: increasing up to 1/size
    return _Summand(g, 1, h, 1.0 / size)


def _cumulative_summand(setting: Setting, r: int) -> _Summand:
    size = setting.size
    if setting.kind == "binomial":
        head = _binom_scaled(size, r)

        def g(p):
            return special.bdtrc(r - 1, size, np.asarray(p, dtype=float))

        def small(p):
            return head(p)

    else:
        log_norm = r * math.log(size) - math.lgamma(r + 1)

        def g(p):
            return special.pdtrc(r - 1, size * np.asarray(p, dtype=float))

        def small(p):
            return np.exp(log_norm - size * np.asarray(p, dtype=float))

    def h(p):
        p = np.maximum(np.asarray(p, dtype=float), _P_FLOOR)
        with np.errstate(under="ignore"):
            pr = p**r
            return np.where(pr > 1e-250, g(p) / np.maximum(pr, 1e-300), small(p))

    # p g'(p) is proportional to p^r (1-p)^(n-r) or x^r e^{-x}: increasing up to r/size
    return _Summand(g, r, h, r / size)


def _occupied_indicator_terms(setting: Setting, p):
    """``(y, 1-y)`` with ``y`` the probability that a symbol is absent."""
    p = np.asarray(p, dtype=float)
    if setting.kind == "binomial":
        with np.errstate(divide="ignore"):
            logy = setting.size * np.log1p(-p)
    else:
        logy = -setting.size * p
    return np.exp(logy), -np.expm1(logy)


def _indicator_variance_summand(setting: Setting, weight_power: int) -> _Summand:
    """``p^w y (1-y)``: occupancy variance (w=0) or missing-mass variance (w=2)."""

    def g(p):
        y, ybar = _occupied_indicator_terms(setting, p)
        p = np.asarray(p, dtype=float)
        return p**weight_power * y * ybar

    def h(p):
        p = np.maximum(np.asarray(p, dtype=float), _P_FLOOR)
        y, ybar = _occupied_indicator_terms(setting, p)
        if weight_power == 0:
            return y * ybar / p
        return p ** (weight_power - 2) * y * ybar

    power = 1 if weight_power == 0 else 2
    return _Summand(g, power, h, _SMALL_P / setting.size)


def c_ls(y):
    """Optimal log-Sobolev constant of a Bernoulli(y) variable.

    ``c(y) = log((1-y)/y) / (1-2y)``, with the removable singularity
    ``c(1/2) = 2``.  Evaluated as ``2 atanh(d)/d`` with ``d = 1-2y``.
    """
    y = np.asarray(y, dtype=float)
    d = 1.0 - 2.0 * y
    small = np.abs(d) < 1e-4
    dd = np.where(small, 1.0, d)
    with np.errstate(divide="ignore"):
        exact = 2.0 * np.arctanh(dd) / dd
    series = 2.0 * (1.0 + d * d / 3.0 + d**4 / 5.0)
    out = np.where(small, series, exact)
    return out if out.ndim else float(out)


def _log_sobolev_summand(setting: Setting) -> _Summand:
    def h(p):
        p = np.asarray(p, dtype=float)
        y, ybar = _occupied_indicator_terms(setting, np.maximum(p, _P_FLOOR))
        # d = 1 - 2y = ybar - y keeps precision when y is close to 1
        d = ybar - y
        small = np.abs(d) < 1e-4
        dd = np.where(small, 0.5, d)
        with np.errstate(divide="ignore"):
            c = np.where(small, 2.0 * (1.0 + d * d / 3.0), 2.0 * np.arctanh(dd) / dd)
        return 1.0 / (2.0 * c)

    def g(p):
        p = np.asarray(p, dtype=float)
        return p * p * h(p)

    return _Summand(g, 2, h, _SMALL_P / setting.size)


def _remainder_summand(setting: Setting, R: int) -> _Summand:
    """``size * p * P(X' >= R)``, whose sum is ``sum_{r>R} r E K_r``."""
    size = setting.size
    if setting.kind == "binomial":

        def tail(p):
            return special.bdtrc(R - 1, size - 1, p) if size >= 1 else np.zeros_like(p)

    else:

        def tail(p):
            return special.pdtrc(R - 1, size * p)

    def g(p):
        p = np.asarray(p, dtype=float)
        return size * p * tail(p)

    def h(p):
        p = np.maximum(np.asarray(p, dtype=float), _P_FLOOR)
        return size * tail(p)

    return _Summand(g, 1, h, _SMALL_P / size)


# ---------------------------------------------------------------------------
# certified summation
# ---------------------------------------------------------------------------


def _tail_integral(model: FrequencyModel, summand: _Summand, J: int):
    """Pieces of the convexity bracket for ``sum_{j>J} g(p_j)``.

    Returns ``(I_half, I_tail, G_next, quad_err)`` with
    ``I_half = int_{J+1/2}^{J+1} G``, ``I_tail = int_{J+1}^inf G`` and
    ``G_next = G(J+1)``.
    """
    k = summand.power

    def integrand_u(u):
        lp = float(model.log_prob_at_log_index(u))
        if lp == -math.inf:
            return 0.0
        log_w = u + k * lp
        if log_w < -745.0:
            return 0.0
        p = max(math.exp(lp), _P_FLOOR)
        return math.exp(log_w) * float(summand.h(p))

    def integrand_x(x):
        return integrand_u(math.log(x)) / x

    quad_err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        I_half, e1 = integrate.quad(integrand_x, J + 0.5, J + 1.0, epsabs=0.0, epsrel=1e-13, limit=100)
        quad_err += e1
        u0 = math.log(J + 1.0)
        I_tail = 0.0
        width = 0.5
        lo = u0
        while True:
            hi = u0 + 2 * width
            piece, e2 = integrate.quad(integrand_u, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
            I_tail += piece
            quad_err += e2
            lo = hi
            width *= 2
            if piece <= 1e-17 * I_tail or width > 64:
                break
        if integrand_u(lo) > 0:
            piece, e2 = integrate.quad(integrand_u, lo, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
            I_tail += piece
            quad_err += e2
    G_next = float(summand.g(model.probs(np.array([J + 1.0])))[0])
    return I_half, I_tail, G_next, quad_err


def _head_sum(model: FrequencyModel, summand: _Summand, start: int, stop: int) -> float:
    """``sum_{start < j <= stop} g(p_j)`` in chunks (pairwise sums, then fsum)."""
    parts = []
    chunk = 2**20
    lo = start
    while lo < stop:
        hi = min(stop, lo + chunk)
        idx = np.arange(lo + 1, hi + 1, dtype=float)
        parts.append(float(np.sum(summand.g(model.probs(idx)))))
        lo = hi
    return math.fsum(parts)


def certified_sum(model: FrequencyModel, summand: _Summand, epsilon: float = DEFAULT_EPSILON) -> Certified:
    """``sum_j g(p_j)`` to relative tolerance ``epsilon`` (see module docstring)."""
    if isinstance(model, Uniform):
        return Certified(model.k * float(summand.g(np.array([1.0 / model.k]))[0]), 0.0)
    if model.support is not None:
        p = model.head_probs(model.support)
        return Certified(math.fsum(summand.g(p)), 0.0)

    # first index whose probability lies in the convex region of G
    if summand.p_convex >= model.prob(1):
        J = 1
    else:
        J = model.counting_function(summand.p_convex) + 1
    J = max(J, 64)
    head = _head_sum(model, summand, 0, J)
    while True:
        I_half, I_tail, G_next, qerr = _tail_integral(model, summand, J)
        lower = I_tail + 0.5 * G_next
        upper = I_tail + I_half
        value = head + 0.5 * (lower + upper)
        error = 0.5 * abs(upper - lower) + qerr + 1e-15 * abs(value)
        if error <= epsilon * abs(value) or value == 0.0 or J >= _MAX_HEAD:
            return Certified(value, error)
        head += _head_sum(model, summand, J, 2 * J)
        J *= 2


def _check_r(r: int, minimum: int) -> None:
    if int(r) != r or r < minimum:
        raise ValueError(f"occupancy level must be an integer >= {minimum}, got {r}")


def expected_occupancy(model: FrequencyModel, setting: Setting, r: int, epsilon: float = DEFAULT_EPSILON) -> Certified:
    """``E K_{n,r}`` (binomial) or ``E K_r(t)`` (Poisson)."""
    _check_r(r, 1)
    if setting.size == 0 or (setting.kind == "binomial" and r > setting.size):
        return Certified(0.0)
    if setting.kind == "binomial":
        summand = _binomial_pmf_summand(setting.size, r, mass=False)
    else:
        summand = _poisson_pmf_summand(setting.size, r, mass=False)
    return certified_sum(model, summand, epsilon)


def expected_coverage(model: FrequencyModel, setting: Setting, epsilon: float = DEFAULT_EPSILON) -> Certified:
    """``E K_n`` or ``E K(t)``: expected number of distinct symbols."""
    if setting.size == 0:
        return Certified(0.0)
    return certified_sum(model, _coverage_summand(setting), epsilon)


def expected_cumulative(model: FrequencyModel, setting: Setting, r: int, epsilon: float = DEFAULT_EPSILON) -> Certified:
    """``E K_{n, >=r}``: symbols seen at least ``r`` times (incomplete beta / gamma tails)."""
    _check_r(r, 1)
    if setting.size == 0 or (setting.kind == "binomial" and r > setting.size):
        return Certified(0.0)
    if r == 1:
        return expected_coverage(model, setting, epsilon)
    return certified_sum(model, _cumulative_summand(setting, r), epsilon)


def expected_mass(model: FrequencyModel, setting: Setting, r: int, epsilon: float = DEFAULT_EPSILON) -> Certified:
    """``E M_{n,r}`` or ``E M_r(t)``: expected mass of symbols seen exactly ``r`` times."""
    _check_r(r, 0)
    if setting.size == 0:
        return Certified(1.0 if r == 0 else 0.0)
    if setting.kind == "binomial":
        if r > setting.size:
            return Certified(0.0)
        summand = _binomial_pmf_summand(setting.size, r, mass=True)
    else:
        summand = _poisson_pmf_summand(setting.size, r, mass=True)
    return certified_sum(model, summand, epsilon)


def occupancy_remainder(model: FrequencyModel, setting: Setting, R: int, epsilon: float = DEFAULT_EPSILON) -> Certified:
    """``sum_{r>R} r E K_r``, so that ``sum_{r<=R} r E K_r + remainder`` equals ``n`` (or ``t``)."""
    _check_r(R, 1)
    if setting.size == 0:
        return Certified(0.0)
    return certified_sum(model, _remainder_summand(setting, R), epsilon)


def var_coverage_poisson(model: FrequencyModel, t: float, epsilon: float = DEFAULT_EPSILON) -> Certified:
    """``var K(t) = E K(2t) - E K(t) = sum_j e^{-tp}(1-e^{-tp})``.

    The right-hand sum is evaluated directly; it avoids the cancellation of
    the difference form when the variance is small relative to ``E K(t)``.
    """
    if t == 0:
        return Certified(0.0)
    return certified_sum(model, _indicator_variance_summand(Setting.poisson(t), 0), epsilon)


@dataclass(frozen=True)
class MissingMassVariance:
    """Poisson missing-mass variance by the occupancy formula and by the direct sum."""

    formula: Certified
    direct: Certified

    @property
    def value(self) -> float:
        return self.formula.value


def var_missing_mass_poisson(model: FrequencyModel, t: float, epsilon: float = DEFAULT_EPSILON) -> MissingMassVariance:
    """``var M_0(t) = 2 E K_2(t)/t^2 - E K_2(2t)/(2t^2)``, with the direct sum as a cross-check."""
    if t == 0:
        return MissingMassVariance(Certified(0.0), Certified(0.0))
    k2 = expected_occupancy(model, Setting.poisson(t), 2, epsilon)
    k2_double = expected_occupancy(model, Setting.poisson(2 * t), 2, epsilon)
    formula = k2.scale(2.0 / t**2) - k2_double.scale(1.0 / (2.0 * t**2))
    direct = certified_sum(model, _indicator_variance_summand(Setting.poisson(t), 2), epsilon)
    return MissingMassVariance(formula, direct)


def var_independent(model: FrequencyModel, n: int, epsilon: float = DEFAULT_EPSILON) -> Certified:
    """``Var^ind(K_n) = E K_{2n} - E K_n = sum_j (1-p)^n (1-(1-p)^n)``."""
    if n == 0:
        return Certified(0.0)
    return certified_sum(model, _indicator_variance_summand(Setting.binomial(n), 0), epsilon)


def log_sobolev_proxy(model: FrequencyModel, setting: Setting, epsilon: float = DEFAULT_EPSILON) -> Certified:
    """``w = sum_j p_j^2 / (2 c_LS(y_j))`` with ``y_j`` the absence probability of symbol ``j``."""
    if setting.size == 0:
        return Certified(0.0)
    return certified_sum(model, _log_sobolev_summand(setting), epsilon)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentReport:
    """Expected counts and masses for one model and setting.

    ``EK_r[i]`` holds level ``r = i + 1``; ``EKbar_r[i]`` likewise (so
    ``EKbar_r[0] == EK``); ``EM_r[i]`` holds level ``r = i``.
    """

    model: str
    setting: Setting
    R: int
    EK: Certified
    EK_r: tuple
    EKbar_r: tuple
    EM_r: tuple
    epsilon: float

    @property
    def truncation_error(self) -> float:
        """Largest certified absolute error over all entries."""
        errs = [self.EK.error] + [c.error for c in self.EK_r + self.EKbar_r + self.EM_r]
        return max(errs)

    def k(self, r: int) -> float:
        return self.EK_r[r - 1].value if 1 <= r <= self.R else 0.0

    def kbar(self, r: int) -> float:
        return self.EKbar_r[r - 1].value

    def m(self, r: int) -> float:
        return self.EM_r[r].value

    def rows(self) -> list[tuple]:
        """``(quantity, r, value, error_bound)`` rows for serialisation."""
        out = [("EK", "", self.EK.value, self.EK.error)]
        out += [("EK_r", r, c.value, c.error) for r, c in enumerate(self.EK_r, start=1)]
        out += [("EKbar_r", r, c.value, c.error) for r, c in enumerate(self.EKbar_r, start=1)]
        out += [("EM_r", r, c.value, c.error) for r, c in enumerate(self.EM_r)]
        return out


def moment_report(
    model: FrequencyModel, setting: Setting, R: int = 5, epsilon: float = DEFAULT_EPSILON
) -> MomentReport:
    _check_r(R, 1)
    ek = expected_coverage(model, setting, epsilon)
    ekr = tuple(expected_occupancy(model, setting, r, epsilon) for r in range(1, R + 1))
    ekbar = (ek,) + tuple(expected_cumulative(model, setting, r, epsilon) for r in range(2, R + 1))
    emr = tuple(expected_mass(model, setting, r, epsilon) for r in range(0, R + 1))
    return MomentReport(model.spec, setting, R, ek, ekr, ekbar, emr, epsilon)


def slow_variation_certificate(model: FrequencyModel, n: int, epsilon: float = 1e-6) -> Optional[float]:
    """``max_{r>=2} E K_r(n) / a(n)`` for a model with a diverging auxiliary function.

    The slow-variation variance factor ``12 a(n)/n^2`` controls the
    log-Laplace series ``sum_{r>=2} (lam/n)^r E K_r(n)`` as soon as every
    ``E K_r(n) <= 6 a(n)``, so a returned value ``<= 6`` certifies the bound
    at this ``n``.  Levels above ``n/(6a)`` are skipped because
    ``E K_r(n) <= n/r`` there.  Returns ``None`` when the model has no
    diverging auxiliary function or ``a(n) <= 0``.
    """
    meta = model.rv_meta
    if meta is None or meta.auxiliary_a is None or not meta.a_diverges:
        return None
    a = meta.auxiliary_a(n)
    if a <= 0:
        return None
    r_max = max(2, math.ceil(n / (6.0 * a)))
    setting = Setting.poisson(n)
    best = 0.0
    r = 2
    while r <= r_max:
        val = expected_occupancy(model, setting, r, epsilon).value
        best = max(best, val / a)
        if val / a < 1e-3 and r > 2:
            # E K_r(n) is unimodal in r for these models; the remaining levels are negligible
            break
        r += 1
    return best


@dataclass(frozen=True)
class VarianceReport:
    """Exact Poisson variances and the variance proxies at sample size ``n``."""

    model: str
    n: int
    var_K: float
    var_M0: float
    v_minus: float
    v_plus: float
    v_slow: Optional[float]
    slow_certificate: Optional[float]
    slow_applies: bool
    n0: int
    w_n: float
    var_ind: float
    efron_stein_r: dict
    v_bar_r: dict
    epsilon: float

    def rows(self) -> list[tuple]:
        out = [
            ("var_K", "", self.var_K, ""),
            ("var_M0", "", self.var_M0, ""),
            ("v_minus", "", self.v_minus, ""),
            ("v_plus", "", self.v_plus, ""),
            ("v_slow", "", self.v_slow if self.v_slow is not None else "", ""),
            ("w_n", "", self.w_n, ""),
            ("var_ind", "", self.var_ind, ""),
        ]
        out += [("efron_stein_r", r, v, "") for r, v in sorted(self.efron_stein_r.items())]
        out += [("v_bar_r", r, v, "") for r, v in sorted(self.v_bar_r.items())]
        return out


def variance_proxies(
    model: FrequencyModel, n: int, epsilon: float = DEFAULT_EPSILON, n0: int = 1000, R: int = 3
) -> VarianceReport:
    """Variance proxies for the missing mass and occupancy counts at sample size ``n``.

    * ``v_minus = 2 E K_2(n) / n^2`` (left tail of the missing mass),
    * ``v_plus = 2 E K_{>=2}(n) / n^2`` (right tail, scale ``1/n``),
    * ``v_slow = 12 a(n) / n^2`` for models whose auxiliary function diverges,
      applied once ``n >= n0`` and the ``6 a(n)`` certificate holds,
    * ``w_n`` the log-Sobolev proxy, ``var_ind = E K_{2n} - E K_n``,
    * ``r E K_{n,r}`` and ``min(r E K_{n,r}, E K_{n,>=r})`` for ``r <= R``.

    ``K_r(n)`` denotes the Poissonised count at intensity ``n``.
    """
    if n < 1:
        raise ValueError("variance proxies need n >= 1")
    pois = Setting.poisson(n)
    binom = Setting.binomial(n)
    k2 = expected_occupancy(model, pois, 2, epsilon).value
    k2bar = expected_cumulative(model, pois, 2, epsilon).value
    v_minus = 2.0 * k2 / n**2
    v_plus = 2.0 * k2bar / n**2
    meta = model.rv_meta
    v_slow = None
    cert = None
    if meta is not None and meta.auxiliary_a is not None and meta.a_diverges:
        a = meta.auxiliary_a(n)
        if a > 0:
            v_slow = 12.0 * a / n**2
            cert = slow_variation_certificate(model, n)
    slow_applies = v_slow is not None and n >= n0 and cert is not None and cert <= 6.0
    es = {}
    vbar = {}
    for r in range(1, R + 1):
        kr = expected_occupancy(model, binom, r, epsilon).value
        krbar = expected_cumulative(model, binom, r, epsilon).value
        es[r] = r * kr
        vbar[r] = min(r * kr, krbar)
    return VarianceReport(
        model=model.spec,
        n=n,
        var_K=var_coverage_poisson(model, n, epsilon).value,
        var_M0=var_missing_mass_poisson(model, n, epsilon).value,
        v_minus=v_minus,
        v_plus=v_plus,
        v_slow=v_slow,
        slow_certificate=cert,
        slow_applies=slow_applies,
        n0=n0,
        w_n=log_sobolev_proxy(model, binom, epsilon).value,
        var_ind=var_independent(model, n, epsilon).value,
        efron_stein_r=es,
        v_bar_r=vbar,
        epsilon=epsilon,
    )


@dataclass(frozen=True)
class PoissonizationGap:
    """Interval diagnostics relating ``var K(n)``, ``Var^ind(K_n)`` and ``var K_n``.

    ``poisson_lower <= var K(n) - Var^ind <= poisson_upper`` and
    ``0 <= Var^ind - var K_n <= binomial_upper``.  ``poisson_chain_holds``
    records whether the first chain is satisfied by the exact values; its
    lower end fails for many models (see the notes), so the implied
    interval for ``var K_n`` is ``[var_ind - binomial_upper, var_ind]``.
    """

    var_poisson: float
    var_ind: float
    poisson_lower: float
    poisson_upper: float
    binomial_lower: float
    binomial_upper: float
    poisson_chain_holds: bool

    @property
    def var_binomial_interval(self) -> tuple:
        return (max(0.0, self.var_ind - self.binomial_upper), self.var_ind)


def poissonization_gap(model: FrequencyModel, n: int, epsilon: float = DEFAULT_EPSILON) -> PoissonizationGap:
    if n < 1:
        raise ValueError("poissonization gap needs n >= 1")
    var_pois = var_coverage_poisson(model, n, epsilon).value
    var_ind = var_independent(model, n, epsilon).value
    k2_double = expected_occupancy(model, Setting.poisson(2 * n), 2, epsilon).value
    k2 = expected_occupancy(model, Setting.poisson(n), 2, epsilon).value
    k1_binom = expected_occupancy(model, Setting.binomial(n), 1, epsilon).value
    k2_binom_double = expected_occupancy(model, Setting.binomial(2 * n), 2, epsilon).value
    lower = k2_double / n
    upper = 2.0 * k2 / n
    gap = var_pois - var_ind
    b_upper = k1_binom**2 / n - k2_binom_double / (2 * n - 1) if n > 0 else 0.0
    return PoissonizationGap(
        var_poisson=var_pois,
        var_ind=var_ind,
        poisson_lower=lower,
        poisson_upper=upper,
        binomial_lower=0.0,
        binomial_upper=b_upper,
        poisson_chain_holds=bool(lower <= gap <= upper),
    )


@dataclass(frozen=True)
class KarlinPrediction:
    """Asymptotic equivalents of the occupancy moments at sample size ``n``."""

    regime: str
    n: float
    r: int
    EK: float
    EK_r: Optional[float]
    EKbar_r: Optional[float]
    var_M0: Optional[float]
    EM_r: Optional[float] = None


def karlin_asymptotics(rv_meta: RegularVariation, n: float, r: int) -> KarlinPrediction:
    """Regime-dependent equivalents of ``E K_n``, ``E K_{n,r}``, ``E K_{n,>=r}`` and ``var M_{n,0}``.

    * ``0 < alpha < 1``: ``Gamma(1-alpha) n^alpha ell(n)``,
      ``alpha Gamma(r-alpha)/r! n^alpha ell(n)``,
      ``Gamma(r-alpha)/(r-1)! n^alpha ell(n)`` and
      ``alpha Gamma(2-alpha)(1-2^{alpha-2}) n^{alpha-2} ell(n)``.
    * ``alpha = 1``: ``n ell1(n)`` for ``K_n`` and ``K_{n,1}``,
      ``n ell(n)/(r(r-1))`` and ``n ell(n)/(r-1)`` for ``r >= 2``.
    * ``alpha = 0`` with auxiliary function ``a``: ``ell(n)``, ``a(n)/r``,
      ``ell(n)`` for the cumulative count, ``3 a(n)/(4 n^2)`` for the
      variance and ``a(n)/n`` for ``E M_{n,r}``.
    """
    alpha = rv_meta.alpha
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"regular-variation index must lie in [0, 1], got {alpha}")
    _check_r(r, 1)
    ell = rv_meta.ell(n)
    if 0.0 < alpha < 1.0:
        scale = n**alpha * ell
        return KarlinPrediction(
            regime="regular",
            n=n,
            r=r,
            EK=math.gamma(1.0 - alpha) * scale,
            EK_r=alpha * math.gamma(r - alpha) / math.factorial(r) * scale,
            EKbar_r=math.gamma(r - alpha) / math.factorial(r - 1) * scale,
            var_M0=alpha * math.gamma(2.0 - alpha) * (1.0 - 2.0 ** (alpha - 2.0)) * n ** (alpha - 2.0) * ell,
        )
    if alpha == 1.0:
        if rv_meta.ell1 is None:
            raise ValueError("fast variation needs the integrated function ell1")
        l1 = rv_meta.ell1(n)
        if r == 1:
            ekr, ekbar = n * l1, n * l1
        else:
            ekr, ekbar = n * ell / (r * (r - 1)), n * ell / (r - 1)
        return KarlinPrediction("fast", n, r, n * l1, ekr, ekbar, ell / (2.0 * n))
    if rv_meta.auxiliary_a is None or not rv_meta.a_diverges:
        return KarlinPrediction("slow", n, r, ell, None, None, None)
    a = rv_meta.auxiliary_a(n)
    return KarlinPrediction("slow", n, r, ell, a / r, ell, 3.0 * a / (4.0 * n**2), a / n)


def relative_fluctuation(model: FrequencyModel, n: int, epsilon: float = DEFAULT_EPSILON) -> Optional[float]:
    """``sqrt(v_plus) / E M_{n,0}``; ``None`` when the expected missing mass vanishes."""
    em = expected_mass(model, Setting.binomial(n), 0, epsilon).value
    if em <= 0.0:
        return None
    k2bar = expected_cumulative(model, Setting.poisson(n), 2, epsilon).value
    return math.sqrt(2.0 * k2bar) / n / em


def exact_binomial_variances(model: FrequencyModel, n: int) -> dict:
    """Exact ``var K_n`` and ``var M_{n,0}`` for a finite model.

    Uses the pairwise formula with ``P(both absent) = (1-p_i-p_j)^n``; cost
    is quadratic in the support size.
    """
    if model.support is None:
        raise ValueError("exact binomial variances need a finite support")
    p = model.head_probs(model.support)
    y = (1.0 - p) ** n
    pair = np.clip(1.0 - p[:, None] - p[None, :], 0.0, None) ** n
    cov = pair - y[:, None] * y[None, :]
    np.fill_diagonal(cov, y * (1.0 - y))
    var_k = float(cov.sum())
    var_m = float(p @ cov @ p)
    return {"var_K": max(var_k, 0.0), "var_M0": max(var_m, 0.0)}
