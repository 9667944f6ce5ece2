"""Frequency models for the infinite urn scheme.

A frequency model is a non-increasing probability sequence ``p_1 >= p_2 >= ...``
over the positive integers.  Besides ``p_j`` itself every model exposes

* a *certified* tail bound ``tail_mass(J) >= sum_{k>J} p_k`` used to truncate
  infinite sums,
* an accurate tail ``tail_exact(j)`` used by the sampler's inverse CDF,
* the counting function ``nu(x) = #{j : p_j >= x}``,
* a continuous version of ``log p`` as a function of ``u = log j``, which the
  moment engine integrates to bracket the far tail of a sum,
* optional regular-variation metadata (index ``alpha``, slowly varying part,
  auxiliary function).

Models are immutable; lazily built lookup tables are cached on the instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "ModelSpecError",
    "RegularVariation",
    "FrequencyModel",
    "Uniform",
    "Zipf",
    "Geometric",
    "StretchedGeometric",
    "FastVariation",
    "Explicit",
    "PoissonPmf",
    "hurwitz_zeta",
    "riemann_zeta",
    "parse_model",
    "prob",
    "tail_mass",
    "counting_function",
    "truncation_index",
    "MODEL_GRAMMAR",
]

MODEL_GRAMMAR = (
    "uniform:k=INT | zipf:s=FLOAT | geom:q=FLOAT | sqrtgeom:q=FLOAT | fastvar"
    " | explicit:@FILE | explicit:P1,P2,... | poissonpmf:lam=FLOAT"
)

# Largest integer index that a float64 represents exactly.
EXACT_INDEX_LIMIT = 2**53

# Bernoulli numbers B_2, B_4, ..., B_16 for Euler-Maclaurin corrections.
_BERNOULLI_EVEN = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
)


class ModelSpecError(ValueError):
    """Raised for malformed model specification strings or parameters."""


def hurwitz_zeta(s: float, a, terms: int = 12) -> np.ndarray:
    """Hurwitz zeta ``sum_{k>=0} (a+k)^{-s}`` by Euler-Maclaurin summation.

    The first ``terms`` summands are added directly; the remainder is the
    integral plus Bernoulli corrections evaluated at ``a + terms``.  For
    ``s > 1`` and ``a >= 1`` the result is accurate to a few ulps.

    Parameters
    ----------
    s : float
        Exponent, must exceed 1.
    a : float or array_like
        Shift, must be positive.  Vectorised.
    terms : int
        Number of leading terms summed explicitly.

    Returns
    -------
    numpy.ndarray
        Values with the broadcast shape of ``a``.
    """
    if not s > 1.0:
        raise ValueError(f"Hurwitz zeta needs s > 1, got {s}")
    a = np.asarray(a, dtype=float)
    total = np.zeros_like(a)
    for k in range(terms):
        total += (a + k) ** (-s)
    x = a + terms
    total += x ** (1.0 - s) / (s - 1.0) + 0.5 * x ** (-s)
    rising = s
    factorial = 2.0
    xpow = x ** (-s - 1.0)
    for k, b in enumerate(_BERNOULLI_EVEN, start=1):
        total += b / factorial * rising * xpow
        rising *= (s + 2 * k - 1) * (s + 2 * k)
        factorial *= (2 * k + 1) * (2 * k + 2)
        xpow = xpow / (x * x)
    return total


def riemann_zeta(s: float) -> float:
    """Riemann zeta function for real ``s > 1``."""
    return float(hurwitz_zeta(s, 1.0))


@dataclass(frozen=True)
class RegularVariation:
    """Regular-variation metadata of a model.

    ``nu(1/x) ~ x**alpha * ell(x)``.  For ``alpha == 0`` models in the de Haan
    class the auxiliary function ``auxiliary_a`` is present; ``a_diverges``
    records whether it tends to infinity (required by the slow-variation
    concentration bound).  ``ell1`` is the integrated slowly varying function
    used when ``alpha == 1``.
    """

    alpha: float
    ell_description: str
    ell: Callable[[float], float]
    auxiliary_a: Optional[Callable[[float], float]] = None
    a_diverges: bool = False
    ell1: Optional[Callable[[float], float]] = None


class FrequencyModel:
    """Base class.  Subclasses are frozen dataclasses."""

    kind: str = "abstract"

    # -- to be provided by subclasses -------------------------------------
    @property
    def support(self) -> Optional[int]:
        """Number of symbols with positive probability, ``None`` if infinite."""
        raise NotImplementedError

    @property
    def spec(self) -> str:
        """Model string in the CLI grammar."""
        raise NotImplementedError

    def probs(self, j) -> np.ndarray:
        """Vectorised ``p_j``; zero outside the support.  ``j`` may be float."""
        raise NotImplementedError

    def tail_exact(self, j) -> np.ndarray:
        """Accurate ``sum_{k>j} p_k`` for integer ``j >= 0`` (vectorised)."""
        raise NotImplementedError

    def tail_mass(self, J: int) -> float:
        """Certified upper bound on ``sum_{k>J} p_k``."""
        raise NotImplementedError

    def counting_function(self, x: float) -> int:
        raise NotImplementedError

    @property
    def rv_meta(self) -> Optional[RegularVariation]:
        return None

    # -- continuous interpolation (infinite support only) --------------------
    def log_prob_at_log_index(self, u):
        """``log p(x)`` at ``x = exp(u)`` for a smooth decreasing interpolant."""
        raise NotImplementedError

    def tail_at_log_index(self, u):
        """Tail ``sum_{k>x} p_k`` at real ``x = exp(u)``, overflow safe."""
        return self.tail_exact(np.exp(np.asarray(u, dtype=float)))

    # -- shared helpers ----------------------------------------------------
    def prob(self, j: int) -> float:
        if j < 1:
            raise ValueError(f"symbol index must be >= 1, got {j}")
        return float(self.probs(np.array([j], dtype=float))[0])

    def head_probs(self, J: int) -> np.ndarray:
        """``(p_1, ..., p_J)`` as an array (truncated to the support)."""
        if self.support is not None:
            J = min(J, self.support)
        return self.probs(np.arange(1, J + 1, dtype=float))

    def _search_count(self, x: float, hi_limit: float = float(EXACT_INDEX_LIMIT)) -> int:
        """Largest ``j`` with ``p_j >= x`` by doubling then bisection."""
        if self.prob(1) < x:
            return 0
        lo, hi = 1, 2
        while self.prob(hi) >= x:
            lo, hi = hi, hi * 2
            if hi > hi_limit:
                raise OverflowError("counting function exceeds the exactly representable index range")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.prob(mid) >= x:
                lo = mid
            else:
                hi = mid
        return lo

    def _adjust_count(self, guess: int, x: float) -> int:
        """Fix a closed-form guess for ``nu(x)`` against rounding."""
        m = max(int(guess), 0)
        while m >= 1 and self.prob(m) < x:
            m -= 1
        while (self.support is None or m < self.support) and self.prob(m + 1) >= x:
            m += 1
        return m

    def _check_x(self, x: float) -> None:
        if not x > 0:
            raise ValueError(f"counting function needs x > 0, got {x}")

    def __str__(self) -> str:
        return self.spec


# ---------------------------------------------------------------------------
# finite models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Uniform(FrequencyModel):
    """Uniform distribution on ``{1, ..., k}``."""

    k: int
    kind = "uniform"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ModelSpecError(f"uniform needs an integer k >= 1, got {self.k}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def support(self) -> int:
        return self.k

    @property
    def spec(self) -> str:
        return f"uniform:k={self.k}"

    def probs(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        return np.where((j >= 1) & (j <= self.k), 1.0 / self.k, 0.0)

    def tail_exact(self, j) -> np.ndarray:
        j = np.floor(np.asarray(j, dtype=float))
        return np.clip(self.k - j, 0, self.k) / self.k

    def tail_mass(self, J: int) -> float:
        return float(self.tail_exact(J))

    def counting_function(self, x: float) -> int:
        self._check_x(x)
        return self.k if x <= 1.0 / self.k else 0


class _TableModel(FrequencyModel):
    """Finite model stored as an explicit probability table."""

    @cached_property
    def _suffix(self) -> np.ndarray:
        # suffix[j] = sum_{k>j} p_k, accumulated from the small end
        p = np.asarray(self.table)
        tail = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
        return np.concatenate([[1.0], tail])

    @property
    def support(self) -> int:
        return len(self.table)

    def probs(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        p = np.asarray(self.table)
        inside = (j >= 1) & (j <= len(p))
        idx = np.where(inside, j, 1).astype(np.int64) - 1
        return np.where(inside, p[idx], 0.0)

    def tail_exact(self, j) -> np.ndarray:
        j = np.clip(np.floor(np.asarray(j, dtype=float)), 0, len(self.table))
        return self._suffix[j.astype(np.int64)]

    def tail_mass(self, J: int) -> float:
        return float(self.tail_exact(J))

    def counting_function(self, x: float) -> int:
        self._check_x(x)
        p = np.asarray(self.table)
        # p is non-increasing; count entries >= x
        return int(np.searchsorted(-p, -x, side="right"))


@dataclass(frozen=True)
class Explicit(_TableModel):
    """Explicit probability list, sorted non-increasing and normalised."""

    table: tuple
    source: Optional[str] = field(default=None, compare=False)
    kind = "explicit"

    def __post_init__(self):
        p = np.asarray(self.table, dtype=float).ravel()
        if p.size == 0:
            raise ModelSpecError("explicit model needs at least one probability")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ModelSpecError("explicit probabilities must be finite and non-negative")
        p = p[p > 0]
        if p.size == 0:
            raise ModelSpecError("explicit model has no positive probability")
        p = np.sort(p)[::-1] / math.fsum(p)
        object.__setattr__(self, "table", tuple(float(v) for v in p))

    @property
    def spec(self) -> str:
        if self.source is not None:
            return f"explicit:@{self.source}"
        return "explicit:" + ",".join(repr(v) for v in self.table)


@dataclass(frozen=True)
class PoissonPmf(_TableModel):
    """Symbols ranked by the Poisson(lam) probability mass function.

    The pmf is truncated where it underflows below ``1e-300``; the dropped
    mass is below double precision resolution.  Its successive ratios tend
    to zero, which makes it the standard very light-tailed example.
    """

    lam: float
    kind = "poisson-pmf"

    def __post_init__(self):
        if not self.lam > 0:
            raise ModelSpecError(f"poissonpmf needs lam > 0, got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))

    @cached_property
    def table(self) -> tuple:
        from scipy import stats

        kmax = int(self.lam + 50 * math.sqrt(self.lam) + 200)
        pmf = stats.poisson.pmf(np.arange(kmax + 1), self.lam)
        pmf = pmf[pmf > 1e-300]
        pmf = np.sort(pmf)[::-1]
        return tuple(float(v) for v in pmf / math.fsum(pmf))

    @property
    def spec(self) -> str:
        return f"poissonpmf:lam={self.lam!r}"


# ---------------------------------------------------------------------------
# infinite models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Zipf(FrequencyModel):
    """Zipf law ``p_j = j^{-s} / zeta(s)`` with ``s > 1``; index ``alpha = 1/s``."""

    s: float
    kind = "zipf"

    def __post_init__(self):
        if not self.s > 1.0:
            raise ModelSpecError(f"zipf needs s > 1, got {self.s}")
        object.__setattr__(self, "s", float(self.s))

    @cached_property
    def zeta(self) -> float:
        return riemann_zeta(self.s)

    @property
    def support(self) -> None:
        return None

    @property
    def spec(self) -> str:
        return f"zipf:s={self.s!r}"

    def probs(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(j >= 1, np.maximum(j, 1.0) ** (-self.s) / self.zeta, 0.0)

    def log_prob_at_log_index(self, u):
        return -self.s * np.asarray(u, dtype=float) - math.log(self.zeta)

    def tail_exact(self, j) -> np.ndarray:
        j = np.maximum(np.asarray(j, dtype=float), 0.0)
        return hurwitz_zeta(self.s, j + 1.0) / self.zeta

    def tail_at_log_index(self, u):
        u = np.asarray(u, dtype=float)
        small = u < 600.0
        out = np.empty_like(u)
        out[small] = self.tail_exact(np.exp(u[small]))
        big = u[~small]
        out[~small] = np.exp((1.0 - self.s) * big - math.log((self.s - 1.0) * self.zeta))
        return out

    def tail_mass(self, J: int) -> float:
        if J <= 0:
            return 1.0
        return min(1.0, float(J) ** (1.0 - self.s) / ((self.s - 1.0) * self.zeta))

    def counting_function(self, x: float) -> int:
        self._check_x(x)
        if x > self.prob(1):
            return 0
        guess = math.floor((1.0 / (x * self.zeta)) ** (1.0 / self.s))
        return self._adjust_count(guess, x)

    def _ell(self, x: float) -> float:
        return self.zeta ** (-1.0 / self.s)

    @property
    def rv_meta(self) -> RegularVariation:
        return RegularVariation(
            alpha=1.0 / self.s,
            ell_description=f"constant zeta(s)^(-1/s) = {self.zeta ** (-1.0 / self.s):.12g}",
            ell=self._ell,
        )


@dataclass(frozen=True)
class Geometric(FrequencyModel):
    """Geometric frequencies ``p_j = q (1-q)^{j-1}`` with success probability ``q``.

    The counting function grows like ``log(x) / log(1/(1-q))``; the auxiliary
    function of the de Haan representation is the constant
    ``1 / log(1/(1-q))``, so the slow-variation bound does not apply.
    """

    q: float
    kind = "geometric"

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ModelSpecError(f"geom needs 0 < q < 1, got {self.q}")
        object.__setattr__(self, "q", float(self.q))

    @property
    def support(self) -> None:
        return None

    @property
    def spec(self) -> str:
        return f"geom:q={self.q!r}"

    @property
    def _log_ratio(self) -> float:
        return math.log1p(-self.q)

    def probs(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        return np.where(j >= 1, self.q * np.exp((np.maximum(j, 1.0) - 1.0) * self._log_ratio), 0.0)

    def log_prob_at_log_index(self, u):
        return math.log(self.q) + (np.exp(np.asarray(u, dtype=float)) - 1.0) * self._log_ratio

    def tail_exact(self, j) -> np.ndarray:
        j = np.maximum(np.asarray(j, dtype=float), 0.0)
        return np.exp(j * self._log_ratio)

    def tail_mass(self, J: int) -> float:
        return float(self.tail_exact(J))

    def counting_function(self, x: float) -> int:
        self._check_x(x)
        if x > self.q:
            return 0
        guess = 1 + math.floor(math.log(x / self.q) / self._log_ratio)
        return self._adjust_count(guess, x)

    def _aux(self, x: float) -> float:
        return -1.0 / self._log_ratio

    def _ell(self, x: float) -> float:
        return float(self.counting_function(1.0 / x))

    @property
    def rv_meta(self) -> RegularVariation:
        return RegularVariation(
            alpha=0.0,
            ell_description="nu(1/x) ~ log(x) / log(1/(1-q))",
            ell=self._ell,
            auxiliary_a=self._aux,
            a_diverges=False,
        )


def _em_tail_sum(f0, f1, f3, integral):
    """Euler-Maclaurin ``sum_{k>J} f(k)`` from ``f(J), f'(J), f'''(J)`` and the integral."""
    return integral - 0.5 * f0 - f1 / 12.0 + f3 / 720.0


@dataclass(frozen=True)
class StretchedGeometric(FrequencyModel):
    """Stretched geometric frequencies ``p_j = c q^{sqrt(j)}``.

    The slowly varying counting function is ``(log(c x) / L)^2`` with
    ``L = log(1/q)`` and the auxiliary function ``a(x) = 2 log(c x) / L^2``
    tends to infinity.
    """

    q: float
    kind = "stretched-geometric"
    _TABLE = 1024

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ModelSpecError(f"sqrtgeom needs 0 < q < 1, got {self.q}")
        object.__setattr__(self, "q", float(self.q))

    @property
    def L(self) -> float:
        return -math.log(self.q)

    def _raw_tail(self, j):
        """Unnormalised ``sum_{k>j} q^{sqrt k}`` for ``j >= _TABLE``."""
        x = np.asarray(j, dtype=float)
        L = self.L
        r = np.sqrt(x)
        f = np.exp(-L * r)
        integral = 2.0 * f * (r / L + 1.0 / L**2)
        f1 = -f * L / (2.0 * r)
        f3 = -f * (L**3 / (8.0 * x * r) + 3.0 * L**2 / (8.0 * x * x) + 3.0 * L / (8.0 * x * x * r))
        return _em_tail_sum(f, f1, f3, integral)

    @cached_property
    def _head_raw(self) -> np.ndarray:
        return np.exp(-self.L * np.sqrt(np.arange(1, self._TABLE + 1, dtype=float)))

    @cached_property
    def c(self) -> float:
        """Normaliser ``1 / sum_j q^{sqrt j}``."""
        total = math.fsum(self._head_raw) + float(self._raw_tail(self._TABLE))
        return 1.0 / total

    @cached_property
    def _suffix(self) -> np.ndarray:
        head = self._head_raw * self.c
        far = float(self._raw_tail(self._TABLE)) * self.c
        suffix = far + np.concatenate([np.cumsum(head[::-1])[::-1][1:], [0.0]])
        return np.concatenate([[far + head.sum()], suffix])

    @property
    def support(self) -> None:
        return None

    @property
    def spec(self) -> str:
        return f"sqrtgeom:q={self.q!r}"

    def probs(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        return np.where(j >= 1, self.c * np.exp(-self.L * np.sqrt(np.maximum(j, 1.0))), 0.0)

    def log_prob_at_log_index(self, u):
        return math.log(self.c) - self.L * np.exp(0.5 * np.asarray(u, dtype=float))

    def tail_exact(self, j) -> np.ndarray:
        j = np.maximum(np.floor(np.asarray(j, dtype=float)), 0.0)
        near = j < self._TABLE
        idx = np.where(near, j, 0).astype(np.int64)
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            far = self._raw_tail(np.maximum(j, self._TABLE)) * self.c
        return np.where(near, self._suffix[idx], far)

    def tail_mass(self, J: int) -> float:
        if J <= 0:
            return 1.0
        r = math.sqrt(J)
        L = self.L
        return min(1.0, self.c * 2.0 * math.exp(-L * r) * (r / L + 1.0 / L**2))

    def counting_function(self, x: float) -> int:
        self._check_x(x)
        if x > self.c * self.q:
            return 0
        guess = math.floor((math.log(self.c / x) / self.L) ** 2)
        return self._adjust_count(guess, x)

    def auxiliary_a(self, x: float) -> float:
        """``a(x) = 2 log(c x) / L^2`` (positive once ``x > 1/c``)."""
        return 2.0 * math.log(self.c * x) / self.L**2

    def _ell(self, x: float) -> float:
        return (math.log(self.c * x) / self.L) ** 2

    @property
    def rv_meta(self) -> RegularVariation:
        return RegularVariation(
            alpha=0.0,
            ell_description="nu(1/x) ~ (log(c x) / log(1/q))^2",
            ell=self._ell,
            auxiliary_a=self.auxiliary_a,
            a_diverges=True,
        )


def _fastvar_integral(u):
    """``int_{e^u}^inf dx / (x log(1+x)^2)`` for ``u >= 9``.

    In the variable ``u = log x`` the integrand is ``(u + log1p(e^-u))^-2``;
    expanding to first order in ``e^-u`` gives ``1/u - 2 E_3(u) / u^2`` with
    an error of order ``e^{-2u}/u^3``.
    """
    u = np.asarray(u, dtype=float)
    return 1.0 / u - 2.0 * special.expn(3, u) / (u * u)


@dataclass(frozen=True)
class FastVariation(FrequencyModel):
    """Fast-variation frequencies ``p_j = 1 / (C j log(j+1)^2)`` (natural log).

    The counting function is regularly varying with index one:
    ``nu(1/x) = x ell(x)`` where ``ell(x) ~ 1 / (C log(x)^2)`` tends to zero.
    """

    kind = "fast-variation"
    _TABLE = 2**18

    @staticmethod
    def _f(x):
        x = np.asarray(x, dtype=float)
        return 1.0 / (x * np.log1p(x) ** 2)

    @staticmethod
    def _f1(x):
        x = np.asarray(x, dtype=float)
        L = np.log1p(x)
        return -1.0 / (x * x * L * L) - 2.0 / (x * (x + 1.0) * L**3)

    def _raw_tail(self, j):
        """Unnormalised ``sum_{k>j} f(k)`` for ``j >= _TABLE``."""
        j = np.asarray(j, dtype=float)
        return _em_tail_sum(self._f(j), self._f1(j), 0.0, _fastvar_integral(np.log(j)))

    @cached_property
    def _head_raw(self) -> np.ndarray:
        return self._f(np.arange(1, self._TABLE + 1, dtype=float))

    @cached_property
    def C(self) -> float:
        """Normalising constant ``sum_j 1/(j log(j+1)^2)``."""
        return math.fsum(self._head_raw) + float(self._raw_tail(self._TABLE))

    @cached_property
    def _suffix(self) -> np.ndarray:
        head = self._head_raw / self.C
        far = float(self._raw_tail(self._TABLE)) / self.C
        suffix = far + np.concatenate([np.cumsum(head[::-1])[::-1][1:], [0.0]])
        return np.concatenate([[far + head.sum()], suffix])

    @property
    def support(self) -> None:
        return None

    @property
    def spec(self) -> str:
        return "fastvar"

    def probs(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(j >= 1, 1.0 / (self.C * np.maximum(j, 1.0) * np.log1p(np.maximum(j, 1.0)) ** 2), 0.0)

    def log_prob_at_log_index(self, u):
        u = np.asarray(u, dtype=float)
        log_l = u + np.log1p(np.exp(-u))  # log(1 + e^u) without overflow
        return -math.log(self.C) - u - 2.0 * np.log(log_l)

    def tail_exact(self, j) -> np.ndarray:
        j = np.maximum(np.floor(np.asarray(j, dtype=float)), 0.0)
        near = j < self._TABLE
        idx = np.where(near, j, 0).astype(np.int64)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            far = self._raw_tail(np.maximum(j, self._TABLE)) / self.C
        return np.where(near, self._suffix[idx], far)

    def tail_at_log_index(self, u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        small = u < 700.0
        out[small] = self.tail_exact(np.exp(u[small]))
        big = u[~small]
        out[~small] = _fastvar_integral(big) / self.C
        return out

    def tail_mass(self, J: int) -> float:
        if J <= 0:
            return 1.0
        if J < 8103:  # below e^9 the first-order expansion is not used
            val, _ = integrate.quad(
                lambda v: 1.0 / (v + math.log1p(math.exp(-v))) ** 2, math.log(J), np.inf, epsabs=0, epsrel=1e-12
            )
        else:
            val = float(_fastvar_integral(math.log(J)))
        return min(1.0, val / self.C)

    def counting_function(self, x: float) -> int:
        self._check_x(x)
        return self._search_count(x)

    # -- regular-variation helpers -----------------------------------------
    def continuous_inverse(self, y: float) -> float:
        """Real ``j`` solving ``C j log(j+1)^2 = y`` (continuous counting function)."""
        logC = math.log(self.C)
        target = math.log(y)

        def g(v):
            return logC + v + 2.0 * math.log(v + math.log1p(math.exp(-v)) if v > 0 else math.log1p(math.exp(v))) - target

        lo, hi = -60.0, max(target, 1.0) + 5.0
        return math.exp(optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-15))

    def ell(self, x: float) -> float:
        """``nu(1/x) / x`` computed from the exact counting function."""
        return self.counting_function(1.0 / x) / x

    def ell1(self, y: float) -> float:
        """``int_y^inf ell(u)/u du`` using the continuous counting function.

        Substituting ``u = C j log(j+1)^2`` and ``v = log j`` turns the
        integral into ``(1/C) int_{v0}^inf [1/L^2 + 2 j/((j+1) L^3)] dv``
        with ``L = log(1+j)``, which decays like ``1/v^2``.
        """
        v0 = math.log(self.continuous_inverse(y))

        def integrand(v):
            L = v + math.log1p(math.exp(-v)) if v > 0 else math.log1p(math.exp(v))
            return 1.0 / L**2 + 2.0 / ((1.0 + math.exp(-v)) * L**3)

        val, _ = integrate.quad(integrand, v0, np.inf, epsabs=0, epsrel=1e-11, limit=200)
        return val / self.C

    @property
    def rv_meta(self) -> RegularVariation:
        return RegularVariation(
            alpha=1.0,
            ell_description="ell(x) ~ 1 / (C log(x)^2), tends to zero",
            ell=self.ell,
            ell1=self.ell1,
        )


# ---------------------------------------------------------------------------
# module level operations and grammar
# ---------------------------------------------------------------------------


def prob(model: FrequencyModel, j: int) -> float:
    """``p_j`` for ``j >= 1``."""
    return model.prob(j)


def tail_mass(model: FrequencyModel, J: int) -> float:
    """Certified upper bound on ``sum_{k>J} p_k``."""
    if J < 0:
        raise ValueError(f"J must be >= 0, got {J}")
    return model.tail_mass(J)


def counting_function(model: FrequencyModel, x: float) -> int:
    """``nu(x) = #{j : p_j >= x}``."""
    return model.counting_function(x)


def truncation_index(model: FrequencyModel, epsilon: float, limit: int = 2**62) -> int:
    """Smallest ``J`` with ``tail_mass(J) <= epsilon``.

    Doubling followed by bisection on the certified bound.  Raises
    ``OverflowError`` if the index would exceed ``limit`` (the fast-variation
    tail decays like ``1/log J``, so tiny tolerances are out of reach).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if model.support is not None and model.tail_mass(model.support) <= epsilon:
        hi = model.support
    else:
        hi = 1
        while model.tail_mass(hi) > epsilon:
            hi *= 2
            if hi > limit:
                raise OverflowError(f"truncation index for {model.spec} at epsilon={epsilon} exceeds {limit}")
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if model.tail_mass(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    return hi if model.tail_mass(lo) > epsilon else lo


def _parse_params(body: str, family: str) -> dict:
    params = {}
    for item in filter(None, body.split(",")):
        if "=" not in item:
            raise ModelSpecError(f"bad parameter {item!r} for {family}; grammar: {MODEL_GRAMMAR}")
        key, value = item.split("=", 1)
        params[key.strip()] = value.strip()
    return params


def _number(params: dict, key: str, family: str, cast=float):
    if key not in params:
        raise ModelSpecError(f"{family} needs parameter {key}; grammar: {MODEL_GRAMMAR}")
    try:
        return cast(params.pop(key))
    except ValueError as exc:
        raise ModelSpecError(f"{family}: cannot parse {key}: {exc}") from None


def _read_probabilities(path: str) -> list[float]:
    values = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        values.append(float(line.split(",")[0]))
    return values


def parse_model(spec: str) -> FrequencyModel:
    """Build a model from the CLI grammar, e.g. ``"zipf:s=2"`` or ``"fastvar"``."""
    spec = spec.strip()
    family, _, body = spec.partition(":")
    family = family.strip().lower()
    try:
        if family == "fastvar":
            if body.strip():
                raise ModelSpecError("fastvar takes no parameters")
            return FastVariation()
        if family == "explicit":
            if body.startswith("@"):
                path = body[1:]
                try:
                    values = _read_probabilities(path)
                except OSError as exc:
                    raise ModelSpecError(f"cannot read {path}: {exc}") from None
                return Explicit(tuple(values), source=path)
            return Explicit(tuple(float(v) for v in body.split(",") if v.strip()))
        params = _parse_params(body, family)
        if family == "uniform":
            model = Uniform(_number(params, "k", family, int))
        elif family == "zipf":
            model = Zipf(_number(params, "s", family))
        elif family in ("geom", "geometric"):
            model = Geometric(_number(params, "q", family))
        elif family == "sqrtgeom":
            model = StretchedGeometric(_number(params, "q", family))
        elif family == "poissonpmf":
            model = PoissonPmf(_number(params, "lam", family))
        else:
            raise ModelSpecError(f"unknown model family {family!r}; grammar: {MODEL_GRAMMAR}")
        if params:
            raise ModelSpecError(f"unexpected parameters {sorted(params)} for {family}")
        return model
    except ModelSpecError:
        raise
    except ValueError as exc:
        raise ModelSpecError(f"malformed model spec {spec!r}: {exc}; grammar: {MODEL_GRAMMAR}") from None
