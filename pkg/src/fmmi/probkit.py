"""Finite-alphabet probability toolkit and method-of-types machinery.

All information quantities are in bits.  ``0 log 0 = 0`` and
``p log(p/0) = +inf`` throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "Pmf",
    "Channel",
    "Composition",
    "JointType",
    "entropy",
    "mutual_information",
    "conditional_kl",
    "joint_type",
    "sample_type_class",
    "enumerate_conditional_types",
    "count_conditional_types",
    "type_class_size",
    "bsc",
    "ENUMERATION_LIMIT",
    "EnumerationGuardError",
    "conditional_type_array",
]

PMF_TOL = 1e-12
INGEST_TOL = 1e-6
ENUMERATION_LIMIT = 10**7


class EnumerationGuardError(RuntimeError):
    """Raised when an exact enumeration would exceed ``ENUMERATION_LIMIT``."""


def _normalize(probs: np.ndarray, what: str) -> np.ndarray:
    if np.any(~np.isfinite(probs)) or np.any(probs < 0):
        raise ValueError(f"{what}: entries must be finite and nonnegative")
    total = probs.sum(axis=-1, keepdims=True)
    if np.any(np.abs(total - 1.0) > INGEST_TOL):
        raise ValueError(f"{what}: entries must sum to 1 (got {np.ravel(total)})")
    return probs / total


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability vector over ``{0, ..., n-1}``.

    Inputs within 1e-6 of normalized are renormalized; anything further
    off is rejected.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size < 2:
            raise ValueError("Pmf: alphabet size must be at least 2")
        p = _normalize(p, "Pmf")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n: int) -> "Pmf":
        return cls(np.full(n, 1.0 / n))

    @property
    def size(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __len__(self):
        return self.size

    def __eq__(self, other):
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"Pmf({np.array2string(self.probs, precision=6, separator=', ')})"


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix ``W[x, y] = p(y|x)``."""

    rows: np.ndarray

    def __post_init__(self):
        w = np.array(self.rows, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 2:
            raise ValueError("Channel: expected a 2-D matrix with at least 2 outputs")
        w = _normalize(w, "Channel row")
        w.setflags(write=False)
        object.__setattr__(self, "rows", w)

    @property
    def n_inputs(self) -> int:
        return self.rows.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.rows.shape[1]

    @property
    def shape(self):
        return self.rows.shape

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, Channel) and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash((self.rows.shape, self.rows.tobytes()))

    def __repr__(self):
        return f"Channel({np.array2string(self.rows, precision=6, separator=', ')})"


def bsc(rho: float) -> Channel:
    """Binary symmetric channel with crossover probability ``rho``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("crossover probability must lie in [0, 1]")
    return Channel([[1.0 - rho, rho], [rho, 1.0 - rho]])


@dataclass(frozen=True)
class Composition:
    """Symbol counts of a constant-composition sequence."""

    counts: tuple[int, ...]

    def __post_init__(self):
        c = tuple(int(v) for v in self.counts)
        if any(v < 0 for v in c) or sum(c) == 0:
            raise ValueError("Composition: counts must be nonnegative with positive sum")
        object.__setattr__(self, "counts", c)

    @property
    def N(self) -> int:
        return sum(self.counts)

    @property
    def pmf(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.N

    @classmethod
    def from_pmf(cls, p, N: int) -> "Composition":
        """Type close to ``p`` at blocklength ``N``.

        Each mass is truncated down to a multiple of ``1/N`` and the leftover
        ``a/N`` goes to the smallest truncated entry, so the sup-norm error
        is at most ``|X|/N``.
        """
        p = np.asarray(p, dtype=float)
        counts = np.floor(p * N + 1e-9).astype(int)
        counts[np.argmin(counts)] += N - counts.sum()
        return cls(tuple(counts))

    def canonical(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.counts)), self.counts)


@dataclass(frozen=True)
class JointType:
    """Joint type of a sequence pair: an ``|X| x |Y|`` count matrix summing to N."""

    counts: np.ndarray

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    @property
    def pmf(self) -> np.ndarray:
        return self.counts / self.N

    @property
    def composition(self) -> Composition:
        return Composition(tuple(self.counts.sum(axis=1)))

    def mutual_information(self) -> float:
        return float(_mi_from_counts(self.counts[None])[0])

    def conditional_entropy(self) -> float:
        """Empirical ``H(y|x)``."""
        return _entropy_arr(self.pmf.ravel()) - _entropy_arr(self.pmf.sum(axis=1))


def _entropy_arr(p: np.ndarray, axis=-1) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=axis)


def entropy(p) -> float:
    """Shannon entropy in bits."""
    return float(_entropy_arr(np.asarray(p, dtype=float)))


def _check_dims(pX: np.ndarray, W: np.ndarray):
    if W.ndim != 2 or W.shape[0] != pX.shape[0]:
        raise ValueError(
            f"dimension mismatch: input pmf has {pX.shape[0]} symbols, "
            f"channel has shape {W.shape}"
        )


def mutual_information(pX, ch) -> float:
    """``I(pX, ch)`` in bits."""
    p = np.asarray(pX, dtype=float)
    W = np.asarray(ch, dtype=float)
    _check_dims(p, W)
    joint = p[:, None] * W
    return float(max(_entropy_arr(joint.sum(axis=0)) + _entropy_arr(p) - _entropy_arr(joint.ravel()), 0.0))


def _mi_from_counts(counts: np.ndarray) -> np.ndarray:
    """Empirical MI for a stack of count tables of shape (..., X, Y)."""
    c = np.asarray(counts, dtype=float)
    n = c.sum(axis=(-2, -1), keepdims=True)
    nx = c.sum(axis=-1, keepdims=True)
    ny = c.sum(axis=-2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(c > 0, c * np.log2(c * n / (nx * ny)), 0.0)
    return np.maximum(terms.sum(axis=(-2, -1)) / n[..., 0, 0], 0.0)


def conditional_kl(q, p, pX) -> float:
    """``D(q || p | pX)`` in bits; ``inf`` when ``q`` escapes the support of ``p``
    on a row with positive input mass."""
    Q = np.asarray(q, dtype=float)
    P = np.asarray(p, dtype=float)
    w = np.asarray(pX, dtype=float)
    _check_dims(w, Q)
    if Q.shape != P.shape:
        raise ValueError("dimension mismatch between channels")
    return float(_cond_kl_arr(Q, P, w))


def _cond_kl_arr(Q: np.ndarray, P: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Vectorized conditional divergence over leading axes of ``Q``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(Q > 0, Q * np.log2(Q / P), 0.0)
        rows = terms.sum(axis=-1)
        return np.where(w > 0, w * rows, 0.0).sum(axis=-1)


def joint_type(x: Sequence[int], y: Sequence[int], nx: int | None = None, ny: int | None = None) -> JointType:
    """Joint type of ``(x, y)``; alphabet sizes default to ``max + 1`` (at least 2)."""
    x = np.asarray(x, dtype=int)
    y = np.asarray(y, dtype=int)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("sequences must be 1-D and of equal length")
    nx = nx or max(int(x.max(initial=0)) + 1, 2)
    ny = ny or max(int(y.max(initial=0)) + 1, 2)
    counts = np.zeros((nx, ny), dtype=np.int64)
    np.add.at(counts, (x, y), 1)
    return JointType(counts)


def sample_type_class(comp: Composition, rng: np.random.Generator, size: int | tuple | None = None) -> np.ndarray:
    """Uniform draw(s) from the type class of ``comp``.

    A Fisher-Yates shuffle of the canonical sequence, so every arrangement
    has probability ``1 / |T|``.  With ``size`` given, returns an array of
    shape ``(*size, N)`` of independent draws.
    """
    base = comp.canonical()
    if size is None:
        return rng.permutation(base)
    shape = (size,) if isinstance(size, int) else tuple(size)
    return rng.permuted(np.broadcast_to(base, shape + base.shape), axis=-1)


def type_class_size(counts: Sequence[int]) -> int:
    """Exact multinomial coefficient ``N! / prod(n_i!)``."""
    total = 0
    size = 1
    for c in counts:
        total += c
        size *= math.comb(total, c)
    return size


def count_conditional_types(comp: Composition, n_outputs: int) -> int:
    return math.prod(math.comb(n + n_outputs - 1, n_outputs - 1) for n in comp.counts)


def _row_compositions(n: int, k: int) -> np.ndarray:
    """All length-``k`` nonnegative integer vectors summing to ``n``."""
    if k == 1:
        return np.array([[n]])
    out = []
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(n + k - 1 - prev - 1)
        out.append(row)
    return np.array(out, dtype=np.int64)


def conditional_type_array(comp: Composition, n_outputs: int) -> np.ndarray:
    """All conditional-count matrices as one ``(K, |X|, |Y|)`` array."""
    total = count_conditional_types(comp, n_outputs)
    if total > ENUMERATION_LIMIT:
        raise EnumerationGuardError(
            f"{total} conditional types exceeds the enumeration limit {ENUMERATION_LIMIT}"
        )
    rows = [_row_compositions(n, n_outputs) for n in comp.counts]
    grids = np.meshgrid(*[np.arange(len(r)) for r in rows], indexing="ij")
    idx = [g.ravel() for g in grids]
    return np.stack([rows[x][idx[x]] for x in range(len(rows))], axis=1)


def enumerate_conditional_types(comp: Composition, n_outputs: int) -> Iterator[np.ndarray]:
    """Yield every ``|X| x |Y|`` count matrix whose row ``x`` sums to ``comp.counts[x]``."""
    yield from conditional_type_array(comp, n_outputs)
