"""Binomial and Poissonised sampling from a frequency model.

A sample of ``n`` i.i.d. symbols is drawn in two exact stages:

1. the counts of the ``J`` most probable symbols and of the remaining tail
   are one multinomial draw over ``(p_1, ..., p_J, T(J))``;
2. each tail draw is located by inverse-CDF search on the model's tail
   function: a uniform ``U`` in ``(0, T(J)]`` selects the symbol ``j`` with
   ``T(j) < U <= T(j-1)``.

Stage 2 resolves integer indices exactly up to ``2**53``.  Beyond that (only
reachable for very heavy tails) the search runs on ``log j`` and the symbol
is identified to floating resolution; such symbols have probability below
``1e-16`` and never repeat at desk-scale sample sizes.

Per-replicate generators come from ``numpy.random.SeedSequence`` with a
spawn key, driving the counter-based Philox bit generator, so results do not
depend on the order in which replicates are processed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .models import EXACT_INDEX_LIMIT, FrequencyModel

__all__ = [
    "OccupancyProfile",
    "make_rng",
    "sample_binomial",
    "sample_poisson",
    "true_mass",
    "max_symbol_index",
    "read_profile",
]

_HEAD_MIN = 64
_HEAD_MAX = 2**16
_GAP_ENUMERATION_LIMIT = 2**20
_GAP_DENSE = 4096

SeedLike = Union[int, np.random.Generator]


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for ``seed`` and an optional replicate key."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def _as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(int(seed))


@dataclass(frozen=True, eq=False)
class OccupancyProfile:
    """Occupancy scores of one sample.

    Attributes
    ----------
    setting : str
        ``"binomial"`` or ``"poisson"``.
    n : int
        Realised sample size (the Poisson draw ``N`` in the Poisson setting).
    t : float or None
        Poisson intensity; ``None`` in the binomial setting.
    symbols : numpy.ndarray
        Occupied symbol indices in increasing order (``int64``, or Python
        integers in an object array when an index exceeds the int64 range).
    counts : numpy.ndarray
        Occupancy score of each symbol, all positive.
    """

    setting: str
    n: int
    t: Optional[float]
    symbols: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if self.setting not in ("binomial", "poisson"):
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.counts.size and int(self.counts.sum()) != self.n:
            raise ValueError("occupancy scores do not sum to the sample size")
        if np.any(self.counts <= 0):
            raise ValueError("only occupied symbols may be stored")

    # -- construction -------------------------------------------------------
    @classmethod
    def from_counts(
        cls, counts: Mapping[int, int], setting: str = "binomial", t: Optional[float] = None
    ) -> "OccupancyProfile":
        items = sorted((int(j), int(x)) for j, x in counts.items() if int(x) > 0)
        symbols = _symbol_array([j for j, _ in items])
        scores = np.array([x for _, x in items], dtype=np.int64)
        return cls(setting, int(scores.sum()), t, symbols, scores)

    @classmethod
    def empty(cls, setting: str = "binomial", t: Optional[float] = None) -> "OccupancyProfile":
        return cls(setting, 0, t, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))

    # -- occupancy statistics ----------------------------------------------
    @property
    def K(self) -> int:
        """Number of distinct symbols."""
        return int(self.counts.size)

    @property
    def profile(self) -> dict:
        """Sparse map ``r -> K_r``."""
        if not self.counts.size:
            return {}
        levels, freq = np.unique(self.counts, return_counts=True)
        return {int(r): int(k) for r, k in zip(levels, freq)}

    def K_r(self, r: int) -> int:
        """Number of symbols seen exactly ``r`` times."""
        return int(np.count_nonzero(self.counts == r))

    def Kbar(self, r: int) -> int:
        """Number of symbols seen at least ``r`` times."""
        return int(np.count_nonzero(self.counts >= r))

    def K_r_vector(self, rmax: int) -> np.ndarray:
        """``(K_1, ..., K_rmax)``."""
        return np.bincount(np.minimum(self.counts, rmax + 1), minlength=rmax + 2)[1 : rmax + 1]

    def count_map(self) -> dict:
        return {int(j): int(x) for j, x in zip(self.symbols, self.counts)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancyProfile):
            return NotImplemented
        return self.to_json() == other.to_json()

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        out = {"setting": self.setting, "n": self.n}
        if self.t is not None:
            out["t"] = self.t
        out["counts"] = [[int(j), int(x)] for j, x in zip(self.symbols, self.counts)]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["symbol", "count"])
        for j, x in zip(self.symbols, self.counts):
            writer.writerow([int(j), int(x)])
        return buf.getvalue()

    def digest(self) -> str:
        """Short SHA-256 fingerprint of the serialised profile."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "OccupancyProfile":
        raw = data["counts"]
        pairs = raw.items() if isinstance(raw, dict) else raw
        counts = {int(j): int(x) for j, x in pairs}
        prof = cls.from_counts(counts, data.get("setting", "binomial"), data.get("t"))
        if "n" in data and int(data["n"]) != prof.n:
            raise ValueError(f"profile declares n={data['n']} but counts sum to {prof.n}")
        return prof


def _symbol_array(values: Sequence[int]) -> np.ndarray:
    if values and max(values) >= 2**62:
        arr = np.empty(len(values), dtype=object)
        arr[:] = list(values)
        return arr
    return np.asarray(values, dtype=np.int64).reshape(-1)


def read_profile(path: Union[str, Path], setting: Optional[str] = None, t: Optional[float] = None) -> OccupancyProfile:
    """Read a profile from JSON or CSV.

    CSV rows are ``symbol,count``; a header row is optional.  When the first
    column is not an integer (for example word tokens from a real corpus),
    symbols are renumbered ``1, 2, ...`` by decreasing count.  A single
    column is read as a list of counts.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        data = json.loads(text)
        if setting is not None:
            data["setting"] = setting
        if t is not None:
            data["t"] = t
        return OccupancyProfile.from_dict(data)
    rows = [row for row in csv.reader(io.StringIO(text)) if row and not row[0].startswith("#")]
    if rows and not _is_number(rows[0][-1]):
        rows = rows[1:]  # header
    if not rows:
        return OccupancyProfile.empty(setting or "binomial", t)
    if len(rows[0]) == 1:
        scores = [int(float(r[0])) for r in rows]
        labels = None
    else:
        scores = [int(float(r[1])) for r in rows]
        labels = [r[0] for r in rows]
    if labels is not None and all(_is_int(x) for x in labels):
        counts: dict = {}
        for j, x in zip(labels, scores):
            counts[int(j)] = counts.get(int(j), 0) + x
    else:
        ranked = sorted(scores, reverse=True)
        counts = {i + 1: x for i, x in enumerate(ranked)}
    if setting is None:
        setting = "poisson" if t is not None else "binomial"
    return OccupancyProfile.from_counts(counts, setting, t)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _is_int(text: str) -> bool:
    try:
        int(text)
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# drawing
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _head_size(model: FrequencyModel, n_bucket: int) -> int:
    """Head size for sample sizes below ``2**n_bucket``: a few times ``nu(1/n)``."""
    if model.support is not None and model.support <= _HEAD_MAX:
        return model.support
    nu = model.counting_function(1.0 / 2.0**n_bucket)
    J = 1 << max(6, math.ceil(math.log2(4 * nu + _HEAD_MIN)))
    J = min(max(J, _HEAD_MIN), _HEAD_MAX)
    if model.support is not None:
        J = min(J, model.support)
    return J


@lru_cache(maxsize=64)
def _head_cells(model: FrequencyModel, J: int) -> np.ndarray:
    """Multinomial cell probabilities: ``p_1..p_J`` and the tail ``T(J)``."""
    p = model.head_probs(J)
    tail = float(model.tail_exact(J)) if model.support is None or J < model.support else 0.0
    cells = np.append(p, max(tail, 0.0))
    return cells / cells.sum()


def _head(model: FrequencyModel, n: int) -> tuple:
    J = _head_size(model, max(int(n).bit_length(), 1))
    return J, _head_cells(model, J)


def _index_from_log(u: float) -> int:
    """Integer close to ``exp(u)`` for ``u`` beyond the float range of exact integers."""
    e2 = u / math.log(2.0)
    shift = max(int(math.floor(e2)) - 52, 0)
    mantissa = int(round(2.0 ** (e2 - shift)))
    return mantissa << shift


def _invert_tail(model: FrequencyModel, J: int, U: np.ndarray) -> list:
    """Symbols ``j > J`` with ``T(j) < U <= T(j-1)`` for every entry of ``U``."""
    m = U.size
    lo = np.full(m, float(J))
    hi = np.full(m, float(2 * J))
    limit = float(EXACT_INDEX_LIMIT)
    active = model.tail_exact(hi) >= U
    while np.any(active):
        lo = np.where(active, hi, lo)
        hi = np.where(active, np.minimum(hi * 2.0, limit), hi)
        at_limit = hi >= limit
        active = (model.tail_exact(hi) >= U) & ~at_limit
    deep = model.tail_exact(np.full(m, limit)) >= U
    # integer bisection: invariant T(lo) >= U > T(hi)
    idx = ~deep
    lo_i, hi_i, u_i = lo[idx], hi[idx], U[idx]
    while True:
        gap = hi_i - lo_i > 1
        if not np.any(gap):
            break
        mid = np.floor((lo_i + hi_i) / 2.0)
        above = model.tail_exact(mid) >= u_i
        lo_i = np.where(gap & above, mid, lo_i)
        hi_i = np.where(gap & ~above, mid, hi_i)
    out: list = [int(v) for v in hi_i]
    if np.any(deep):
        out.extend(_invert_tail_log(model, U[deep]))
    return out


def _invert_tail_log(model: FrequencyModel, U: np.ndarray) -> list:
    """Bisection on ``u = log j`` for tail draws beyond ``2**53``."""
    lo = np.full(U.size, math.log(EXACT_INDEX_LIMIT))
    hi = lo * 2.0
    while True:
        grow = model.tail_at_log_index(hi) >= U
        if not np.any(grow):
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, hi * 2.0, hi)
    for _ in range(200):
        if np.all(hi - lo <= 4e-16 * hi):
            break
        mid = 0.5 * (lo + hi)
        above = model.tail_at_log_index(mid) >= U
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return [_index_from_log(float(u)) for u in hi]


def _draw(model: FrequencyModel, n: int, rng: np.random.Generator) -> tuple:
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    J, cells = _head(model, n)
    draw = rng.multinomial(n, cells)
    head_counts = draw[:J]
    occupied = np.flatnonzero(head_counts)
    symbols = (occupied + 1).astype(np.int64)
    counts = head_counts[occupied].astype(np.int64)
    m = int(draw[J])
    if m:
        tail_prob = float(cells[J])
        U = tail_prob * (1.0 - rng.random(m))
        tail_symbols = _invert_tail(model, J, U)
        uniq: dict = {}
        for j in tail_symbols:
            uniq[j] = uniq.get(j, 0) + 1
        keys = sorted(uniq)
        all_symbols = [int(v) for v in symbols] + keys
        counts = np.concatenate([counts, np.array([uniq[k] for k in keys], dtype=np.int64)])
        symbols = _symbol_array(all_symbols)
    return symbols, counts


def sample_binomial(model: FrequencyModel, n: int, seed: SeedLike) -> OccupancyProfile:
    """Profile of ``n`` i.i.d. draws from ``model``."""
    if n < 0:
        raise ValueError("sample size must be >= 0")
    symbols, counts = _draw(model, int(n), _as_rng(seed))
    return OccupancyProfile("binomial", int(n), None, symbols, counts)


def sample_poisson(model: FrequencyModel, t: float, seed: SeedLike) -> OccupancyProfile:
    """Profile of a Poisson(``t``) number of i.i.d. draws from ``model``."""
    if t < 0:
        raise ValueError("intensity must be >= 0")
    rng = _as_rng(seed)
    N = int(rng.poisson(t)) if t > 0 else 0
    symbols, counts = _draw(model, N, rng)
    return OccupancyProfile("poisson", N, float(t), symbols, counts)


def _float_index(j: int) -> float:
    try:
        return float(j)
    except OverflowError:
        return math.inf


def _symbol_probs(model: FrequencyModel, symbols: np.ndarray) -> np.ndarray:
    if symbols.dtype == object:
        x = np.array([_float_index(j) for j in symbols], dtype=float)
    else:
        x = np.asarray(symbols, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return model.probs(x)


def true_mass(model: FrequencyModel, profile: OccupancyProfile, r: int = 0) -> float:
    """``M_r``: total probability of the symbols seen exactly ``r`` times.

    ``r = 0`` is the missing mass.  When the largest occupied index is small
    compared with the number of occupied symbols, it is computed as the
    exact tail beyond that index plus the unobserved symbols below it, which
    keeps full relative precision for light tails; otherwise as
    ``1 - sum of observed probabilities``.  The model must be
    the one that generated the profile; this cannot be checked.
    """
    if r < 0:
        raise ValueError("occupancy level must be >= 0")
    if r > 0:
        sel = profile.symbols[profile.counts == r]
        return math.fsum(_symbol_probs(model, sel))
    if profile.K == 0:
        return 1.0
    top = max_symbol_index(profile)
    if top <= min(_GAP_ENUMERATION_LIMIT, max(_GAP_DENSE, 16 * profile.K)):
        if model.support is not None and top >= model.support:
            below = np.arange(1, model.support + 1)
            tail = 0.0
        else:
            below = np.arange(1, top + 1)
            tail = float(model.tail_exact(top))
        mask = np.ones(below.size, dtype=bool)
        mask[np.asarray(profile.symbols, dtype=np.int64) - 1] = False
        return math.fsum(_symbol_probs(model, below[mask])) + tail
    return max(0.0, 1.0 - math.fsum(_symbol_probs(model, profile.symbols)))


def max_symbol_index(profile: OccupancyProfile) -> Optional[int]:
    """Largest occupied symbol index, ``None`` for an empty profile."""
    if profile.K == 0:
        return None
    return int(profile.symbols[-1])
