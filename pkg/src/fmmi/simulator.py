"""Monte Carlo simulation of random constant-composition codes with erasure/list decoding.

Each trial draws a fresh codebook (so estimates are ensemble averages),
sends message 0 through the channel and decodes.  Trials run in fixed-size
blocks; block ``b`` at blocklength ``N`` draws from its own generator seeded by
``(seed, N, b)``, so results do not depend on how blocks are spread across
threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .probkit import Channel, Composition, Pmf, _entropy_arr, _mi_from_counts, sample_type_class
from .weightfn import WeightFn

__all__ = [
    "CodebookGuardError",
    "Codebook",
    "Decoder",
    "SimConfig",
    "BlockTally",
    "NResult",
    "SimResult",
    "MAX_CODEWORDS",
    "codebook_size",
    "build_codebook",
    "transmit",
    "empirical_mi",
    "loglik",
    "decode_fmmi",
    "decode_mmi",
    "decode_ck",
    "decode_equivocation",
    "decode_forney",
    "wilson_interval",
    "run_experiment",
]

MAX_CODEWORDS = 2**20
LN2 = math.log(2.0)


class CodebookGuardError(RuntimeError):
    """Raised when a codebook would exceed ``MAX_CODEWORDS``."""


def codebook_size(N: int, R: float) -> int:
    """``max(2, round(2^{NR}))``."""
    M = max(2, int(round(2.0 ** (N * R))))
    if M > MAX_CODEWORDS:
        raise CodebookGuardError(f"M = {M} codewords exceeds the limit {MAX_CODEWORDS}")
    return M


@dataclass(frozen=True, eq=False)
class Codebook:
    N: int
    R: float
    comp: Composition
    codewords: np.ndarray  # (M, N)

    @property
    def M(self) -> int:
        return self.codewords.shape[0]

    @property
    def R_eff(self) -> float:
        """``log2(M) / N``: the rate the decision rule actually uses."""
        return math.log2(self.M) / self.N


def build_codebook(N: int, R: float, comp: Composition, rng: np.random.Generator) -> Codebook:
    """``M = max(2, round(2^{NR}))`` codewords drawn i.i.d. uniformly from the type class."""
    if comp.N != N:
        raise ValueError(f"composition has length {comp.N}, expected {N}")
    M = codebook_size(N, R)
    return Codebook(N, R, comp, sample_type_class(comp, rng, M))


def transmit(cw, ch: Channel, rng: np.random.Generator) -> np.ndarray:
    """Pass each symbol independently through ``ch``; works on any array of inputs."""
    x = np.asarray(cw)
    cdf = np.cumsum(np.asarray(ch.rows), axis=1)[:, :-1]
    u = rng.random(x.shape)
    return (u[..., None] >= cdf[x]).sum(axis=-1).astype(np.int8)


def _joint_counts(cw: np.ndarray, y: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """Joint-type counts of every codeword with ``y``: shape ``(..., M, nx, ny)``."""
    idx = cw.astype(np.int16) * ny + y[..., None, :]
    counts = np.stack([(idx == k).sum(axis=-1) for k in range(nx * ny)], axis=-1)
    return counts.reshape(counts.shape[:-1] + (nx, ny))


def empirical_mi(cw: np.ndarray, y: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """``I(x(m); y)`` in bits for each codeword.

    Rounded to 1e-12 so that joint types with equal information (row or
    column swaps) tie exactly instead of differing in the last bits.
    """
    return np.round(_mi_from_counts(_joint_counts(cw, y, nx, ny)), 12)


def _equivocation(cw: np.ndarray, y: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """Empirical ``H(y | x(m))`` in bits."""
    c = _joint_counts(cw, y, nx, ny).astype(float)
    N = cw.shape[-1]
    pxy = c / N
    return np.round(_entropy_arr(pxy.reshape(pxy.shape[:-2] + (-1,))) - _entropy_arr(pxy.sum(axis=-1)), 12)


def loglik(cw: np.ndarray, y: np.ndarray, ch: Channel) -> np.ndarray:
    """``log2 p^N(y | x(m))`` per codeword; ``-inf`` for impossible pairs."""
    with np.errstate(divide="ignore"):
        L = np.log2(np.asarray(ch.rows))
    return L[cw, y[..., None, :]].sum(axis=-1)


def _competitor_max(vals: np.ndarray) -> np.ndarray:
    """For each ``m``, ``max over i != m`` of ``vals[..., i]`` (top-two trick)."""
    M = vals.shape[-1]
    order = np.argsort(vals, axis=-1)
    top = np.take_along_axis(vals, order[..., -1:], axis=-1)
    second = np.take_along_axis(vals, order[..., -2:-1], axis=-1) if M > 1 else np.full_like(top, -np.inf)
    is_top = np.arange(M) == order[..., -1:]
    return np.where(is_top, second, top)


def _fmmi_mask(I: np.ndarray, F: WeightFn, R: float) -> np.ndarray:
    # compared as excess over R so that F(t) = t reproduces MMI ties exactly
    penal = np.asarray(F(I - R), dtype=float)
    return I - R > _competitor_max(penal)


def _ck_mask(I: np.ndarray, delta: float, lam: float, R: float) -> np.ndarray:
    excess = np.maximum(I - R, 0.0)
    return I - R > delta + lam * _competitor_max(excess)


def _equivocation_mask(negH: np.ndarray, delta: float) -> np.ndarray:
    return negH > delta + _competitor_max(negH)


def _lse2(v: np.ndarray) -> np.ndarray:
    top = v.max(axis=-1, keepdims=True)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = safe[..., 0] + np.log2(np.exp2(v - safe).sum(axis=-1))
    return np.where(np.isfinite(top[..., 0]), out, top[..., 0])


def _forney_mask(L: np.ndarray, T_bits_total: float, variant: str) -> np.ndarray:
    if variant == "max2":
        return L > T_bits_total + _competitor_max(L)
    if variant != "sum":
        raise ValueError("variant must be 'sum' or 'max2'")
    M = L.shape[-1]
    others = np.empty(L.shape)
    for m in range(M):
        rest = np.delete(L, m, axis=-1)
        others[..., m] = _lse2(rest)
    return L > T_bits_total + others


def _list(mask: np.ndarray) -> list[int]:
    return [int(i) for i in np.nonzero(mask)[0]]


def _nxy(cb: Codebook, ny: int | None, y) -> tuple[int, int]:
    nx = len(cb.comp.counts)
    return nx, ny or max(int(np.max(y)) + 1, 2)


def decode_fmmi(cb: Codebook, y, F: WeightFn, ny: int | None = None) -> list[int]:
    """Every ``m`` with ``I(x(m); y) > R + max over i != m of F(I(x(i); y) - R)``.

    The empty list is an erasure.  ``R`` is the effective rate ``log2(M)/N``.
    """
    y = np.asarray(y)
    nx, ny = _nxy(cb, ny, y)
    return _list(_fmmi_mask(empirical_mi(cb.codewords, y, nx, ny), F, cb.R_eff))


def decode_mmi(cb: Codebook, y, ny: int | None = None) -> list[int]:
    """Unique maximizer of the empirical MI; a tie is an erasure."""
    y = np.asarray(y)
    nx, ny = _nxy(cb, ny, y)
    I = empirical_mi(cb.codewords, y, nx, ny)
    return _list(I > _competitor_max(I))


def decode_ck(cb: Codebook, y, delta: float, lam: float, ny: int | None = None) -> list[int]:
    """``I(x(m); y) > R + delta + lam * max over i != m of |I(x(i); y) - R|^+``."""
    y = np.asarray(y)
    nx, ny = _nxy(cb, ny, y)
    return _list(_ck_mask(empirical_mi(cb.codewords, y, nx, ny), delta, lam, cb.R_eff))


def decode_equivocation(cb: Codebook, y, delta: float, ny: int | None = None) -> list[int]:
    """``-H(y|x(m)) > delta + max over i != m of -H(y|x(i))``: Forney's
    max-competitor rule with the log-likelihood replaced by the empirical one."""
    y = np.asarray(y)
    nx, ny = _nxy(cb, ny, y)
    return _list(_equivocation_mask(-_equivocation(cb.codewords, y, nx, ny), delta))


def decode_forney(cb: Codebook, y, ch: Channel, T: float, variant: str = "sum") -> list[int]:
    """Forney's known-channel rule with threshold ``e^{NT}`` (``T`` in nats per letter).

    ``sum``: likelihood beats ``e^{NT}`` times the sum over competitors.
    ``max2``: beats ``e^{NT}`` times the best competitor.
    For ``T >= 0`` at most one message is returned.
    """
    L = loglik(cb.codewords, np.asarray(y), ch)
    return _list(_forney_mask(L, cb.N * T / LN2, variant))


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class Decoder:
    """Decoder choice.  ``kind`` in ``fmmi, mmi, ck, equivocation, forney, forney2``."""

    kind: str
    F: WeightFn | None = None
    delta: float = 0.0
    lam: float = 1.0
    T: float = 0.0  # nats per letter

    def __post_init__(self):
        if self.kind not in ("fmmi", "mmi", "ck", "equivocation", "forney", "forney2"):
            raise ValueError(f"unknown decoder {self.kind!r}")
        if self.kind == "fmmi" and self.F is None:
            raise ValueError("fmmi decoder needs a weighting function")

    @property
    def needs_channel(self) -> bool:
        return self.kind in ("forney", "forney2")


@dataclass
class SimConfig:
    true_channel: Channel
    decoder: Decoder
    R: float
    pX: Pmf
    trials: int
    seed: int
    blocklengths: list
    threads: int = 1
    block_size: int = 1000
    knows_channel: bool = False

    def validate(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.blocklengths or any(int(N) < 1 for N in self.blocklengths):
            raise ValueError("blocklengths must be positive integers")
        if self.decoder.needs_channel and not self.knows_channel:
            raise ValueError("Forney decoders need knows_channel=True")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        ch = self.true_channel
        if ch.n_inputs != len(self.pX) or ch.n_inputs > 8 or ch.n_outputs > 8:
            raise ValueError("channel must match the input pmf and have at most 8 inputs and outputs")
        if self.block_size < 1:
            raise ValueError("block_size must be positive")
        for N in self.blocklengths:
            codebook_size(int(N), self.R)


@dataclass
class BlockTally:
    """Counts over a block of trials.  ``correct + erasures + undetected = trials``;
    ``misses = erasures + undetected`` counts trials whose list lacks the sent message."""

    trials: int = 0
    correct: int = 0
    erasures: int = 0
    undetected: int = 0
    n_incorrect: int = 0
    n_incorrect_sq: int = 0
    max_list: int = 0

    def __add__(self, other: "BlockTally") -> "BlockTally":
        return BlockTally(self.trials + other.trials, self.correct + other.correct,
                          self.erasures + other.erasures, self.undetected + other.undetected,
                          self.n_incorrect + other.n_incorrect,
                          self.n_incorrect_sq + other.n_incorrect_sq,
                          max(self.max_list, other.max_list))

    @property
    def misses(self) -> int:
        return self.erasures + self.undetected


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return lo, hi


@dataclass
class NResult:
    N: int
    M: int
    R_eff: float
    tally: BlockTally

    def _rate(self, k):
        return k / self.tally.trials

    @property
    def erasure_rate(self) -> float:
        """Empty-list rate."""
        return self._rate(self.tally.erasures)

    @property
    def miss_rate(self) -> float:
        """Rate at which the sent message is absent from the output."""
        return self._rate(self.tally.misses)

    @property
    def undetected_rate(self) -> float:
        return self._rate(self.tally.undetected)

    @property
    def mean_incorrect(self) -> float:
        return self.tally.n_incorrect / self.tally.trials

    def ci(self, what: str) -> tuple[float, float]:
        n = self.tally.trials
        if what == "mean_incorrect":
            m = self.mean_incorrect
            var = max(self.tally.n_incorrect_sq / n - m * m, 0.0)
            h = 1.959963984540054 * math.sqrt(var / n)
            return max(m - h, 0.0), m + h
        k = {"erasure": self.tally.erasures, "miss": self.tally.misses,
             "undetected": self.tally.undetected}[what]
        return wilson_interval(k, n)


def _fit_slope(N, vals) -> float:
    """Least-squares slope of ``log2(vals)`` against ``N`` over the positive entries."""
    N = np.asarray(N, dtype=float)
    v = np.asarray(vals, dtype=float)
    ok = v > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(N[ok], np.log2(v[ok]), 1)[0])


@dataclass
class SimResult:
    per_N: list = field(default_factory=list)

    def slopes(self) -> dict:
        """Empirical ``log2`` slopes per letter of miss, erasure, undetected and mean-``N_i`` estimates."""
        Ns = [r.N for r in self.per_N]
        return {
            "miss": _fit_slope(Ns, [r.miss_rate for r in self.per_N]),
            "erasure": _fit_slope(Ns, [r.erasure_rate for r in self.per_N]),
            "undetected": _fit_slope(Ns, [r.undetected_rate for r in self.per_N]),
            "mean_incorrect": _fit_slope(Ns, [r.mean_incorrect for r in self.per_N]),
        }


def _decide(dec: Decoder, cw: np.ndarray, y: np.ndarray, R_eff: float, ch: Channel) -> np.ndarray:
    nx, ny = ch.n_inputs, ch.n_outputs
    if dec.kind in ("forney", "forney2"):
        L = loglik(cw, y, ch)
        return _forney_mask(L, cw.shape[-1] * dec.T / LN2, "sum" if dec.kind == "forney" else "max2")
    if dec.kind == "equivocation":
        return _equivocation_mask(-_equivocation(cw, y, nx, ny), dec.delta)
    I = empirical_mi(cw, y, nx, ny)
    if dec.kind == "mmi":
        return I > _competitor_max(I)
    if dec.kind == "ck":
        return _ck_mask(I, dec.delta, dec.lam, R_eff)
    return _fmmi_mask(I, dec.F, R_eff)


def _run_block(cfg: SimConfig, N: int, comp: Composition, M: int, b: int, size: int) -> BlockTally:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(N, b)))
    cw = sample_type_class(comp, rng, (size, M)).astype(np.int8)
    y = transmit(cw[:, 0, :], cfg.true_channel, rng)
    mask = _decide(cfg.decoder, cw, y, math.log2(M) / N, cfg.true_channel)
    sent = mask[:, 0]
    wrong = mask[:, 1:].sum(axis=1)
    listed = mask.sum(axis=1)
    return BlockTally(
        trials=size,
        correct=int(sent.sum()),
        erasures=int((listed == 0).sum()),
        undetected=int(((~sent) & (listed > 0)).sum()),
        n_incorrect=int(wrong.sum()),
        n_incorrect_sq=int((wrong.astype(np.int64) ** 2).sum()),
        max_list=int(listed.max(initial=0)),
    )


def run_experiment(cfg: SimConfig) -> SimResult:
    """Estimate erasure, undetected-error and list statistics at each blocklength."""
    cfg.validate()
    out = SimResult()
    for N in (int(n) for n in cfg.blocklengths):
        comp = Composition.from_pmf(cfg.pX.probs, N)
        M = codebook_size(N, cfg.R)
        sizes = [cfg.block_size] * (cfg.trials // cfg.block_size)
        if cfg.trials % cfg.block_size:
            sizes.append(cfg.trials % cfg.block_size)
        jobs = list(enumerate(sizes))
        if cfg.threads > 1:
            with ThreadPoolExecutor(cfg.threads) as pool:
                tallies = list(pool.map(lambda j: _run_block(cfg, N, comp, M, *j), jobs))
        else:
            tallies = [_run_block(cfg, N, comp, M, *j) for j in jobs]
        total = BlockTally()
        for t in tallies:
            total = total + t
        out.per_N.append(NResult(N, M, math.log2(M) / N, total))
    return out
