"""Relative minimax design: exponents measured against channel-dependent references.

A reference functional assigns each channel in the class a target exponent
``alpha(p)``.  The shifted exponents ``E(p) - alpha(p)`` are then minimized
over the class, and the optimal weighting function is the negated shifted
sphere-packing exponent.  Good channels can thus be held to a higher
standard than the noisiest member.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exponents import _as_class, _as_pmf, _channel_curve, adaptive_knots, erf
from .probkit import Channel, bsc, entropy
from .weightfn import DEFAULT_KNOTS, WeightFn

__all__ = [
    "ReferenceFunctional",
    "relative_members",
    "delta_alpha_erf",
    "delta_alpha_esp",
    "rel_F_builder",
    "rel_optimal_F",
    "minimax_attribution",
    "relative_attribution",
]


@dataclass(frozen=True)
class ReferenceFunctional:
    """Target exponent per channel.

    ``constant``: ``alpha(p) = value``.  ``forney``: ``alpha(p) = E_sp(R, p) + delta``
    (the exponent Forney's rule attains when ``p`` is known), with the matching
    erasure reference ``E_sp(R + delta, p)``.  ``custom``: a table indexed by
    class member, no interpolation.
    """

    kind: str
    value: float = 0.0
    R: float | None = None
    delta: float | None = None
    table: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in ("constant", "forney", "custom"):
            raise ValueError(f"unknown reference kind {self.kind!r}")
        if self.kind == "forney" and (self.R is None or self.delta is None):
            raise ValueError("forney reference needs R and delta")
        if self.kind == "custom":
            object.__setattr__(self, "table", tuple(float(v) for v in self.table))

    @classmethod
    def constant(cls, value: float) -> "ReferenceFunctional":
        return cls("constant", value=float(value))

    @classmethod
    def forney(cls, R: float, delta: float) -> "ReferenceFunctional":
        return cls("forney", R=float(R), delta=float(delta))

    @classmethod
    def custom(cls, values) -> "ReferenceFunctional":
        return cls("custom", table=tuple(values))

    def alpha(self, pX, members) -> np.ndarray:
        """Incorrect-message reference for each member."""
        if self.kind == "constant":
            return np.full(len(members), self.value)
        if self.kind == "custom":
            if len(self.table) != len(members):
                raise ValueError("custom reference table must have one entry per class member")
            return np.asarray(self.table)
        p = _as_pmf(pX)
        return np.array([_channel_curve(p, ch).value(self.R) for ch in members]) + self.delta

    def beta(self, pX, members) -> np.ndarray:
        """Erasure reference: the thresholding (constant) or Forney erasure exponent."""
        if self.kind == "custom":
            return np.zeros(len(members))
        p = _as_pmf(pX)
        d = self.value if self.kind == "constant" else self.delta
        R = self.R if self.R is not None else 0.0
        return np.array([_channel_curve(p, ch).value(R + d) for ch in members])


def relative_members(W, fast: bool = True) -> tuple[Channel, ...]:
    """Members to scan.  For BSC intervals the fast path keeps only the endpoints,
    where the per-channel extrema sit; ``fast=False`` uses the full grid."""
    W = _as_class(W)
    if not W.members:
        raise ValueError("compound class is empty")
    if fast and W.kind == "bsc":
        return (bsc(W.rho_min), bsc(W.rho_max)) if W.rho_max > W.rho_min else (bsc(W.rho_min),)
    return W.members


def _members_for(W, aref: ReferenceFunctional, fast: bool):
    # custom tables are indexed by the full member list
    return relative_members(W, fast and aref.kind != "custom")


def delta_alpha_erf(R: float, pX, W, F: WeightFn, aref: ReferenceFunctional, fast: bool = True) -> float:
    """``min over members of E_{r,F}(R, p) - alpha(p)``."""
    members = _members_for(W, aref, fast)
    al = aref.alpha(pX, members)
    return float(min(erf(R, pX, ch, F) - a for ch, a in zip(members, al)))


def _shifted_esp(p: np.ndarray, members, al: np.ndarray, Rs) -> np.ndarray:
    Rs = np.asarray(Rs, dtype=float)
    vals = np.stack([np.asarray(_channel_curve(p, ch).value(Rs), dtype=float) - a
                     for ch, a in zip(members, al)])
    return vals


def delta_alpha_esp(R, pX, W, aref: ReferenceFunctional, fast: bool = True):
    """``min over members of E_sp(R, p) - alpha(p)``; vectorized in ``R``."""
    members = _members_for(W, aref, fast)
    p = _as_pmf(pX)
    out = _shifted_esp(p, members, aref.alpha(pX, members), R).min(axis=0)
    return out if out.ndim else float(out)


def _rate_span(p, members) -> tuple[float, float]:
    curves = [_channel_curve(p, ch) for ch in members]
    return min(c.R_inf for c in curves), max(c.I for c in curves)


def rel_F_builder(R: float, pX, W, aref: ReferenceFunctional, n_knots: int = DEFAULT_KNOTS,
                  fast: bool = True) -> WeightFn:
    """``t -> D(R) - D(R + t)`` where ``D`` is the shifted class exponent."""
    members = _members_for(W, aref, fast)
    p = _as_pmf(pX)
    al = aref.alpha(pX, members)
    H = entropy(p)
    lo, top = _rate_span(p, members)
    g = lambda r: _shifted_esp(p, members, al, r).min(axis=0)
    d0 = float(g(R))
    if not np.isfinite(d0):
        raise ValueError(f"rate {R} is below R_inf of every member")
    if top <= R:
        return WeightFn([-R, H - R], [0.0, 0.0], params={"R": R})
    x, y = adaptive_knots(lambda t: d0 - g(R + t), lo - R, top - R, n_knots)
    if H > top:
        x, y = np.append(x, H - R), np.append(y, y[-1])
    return WeightFn(x, y, left=-np.inf if lo > 0 else None, params={"R": R})


def rel_optimal_F(R: float, pX, W, aref: ReferenceFunctional, bref: ReferenceFunctional | None = None,
                  n_knots: int = DEFAULT_KNOTS, fast: bool = True) -> WeightFn:
    """Relative-minimax optimal weighting: ``-D(R + t)`` for ``t >= 0`` and the
    constant ``-D(R)`` for ``t <= 0``.

    The erasure reference ``bref`` is accepted for symmetry with the problem
    statement but does not enter the optimum.
    """
    members = _members_for(W, aref, fast)
    p = _as_pmf(pX)
    al = aref.alpha(pX, members)
    H = entropy(p)
    _, top = _rate_span(p, members)
    g = lambda r: _shifted_esp(p, members, al, r).min(axis=0)
    d0 = float(g(R))
    if not np.isfinite(d0):
        raise ValueError(f"rate {R} is below R_inf of every member")
    params = {"R": R, "reference": aref.kind}
    if top <= R:
        return WeightFn([-R, H - R], [-d0, -d0], kind="optimal-list", params=params)
    x, y = adaptive_knots(lambda t: -g(R + t), 0.0, top - R, n_knots)
    x = np.concatenate([[-R], x])
    y = np.concatenate([[-d0], y])
    y[1] = -d0
    if H > top:
        x, y = np.append(x, H - R), np.append(y, y[-1])
    return WeightFn(x, y, kind="optimal-list", params=params)


def minimax_attribution(R: float, pX, W, t) -> np.ndarray:
    """Index (into ``W.members``) of the channel with the smallest ``E_sp(R + t)``.

    Ties go to the noisiest member, i.e. the highest index for a BSC interval.
    """
    W = _as_class(W)
    p = _as_pmf(pX)
    vals = _shifted_esp(p, W.members, np.zeros(len(W.members)), R + np.asarray(t, dtype=float))
    return _argext(vals, prefer_last=True)


def relative_attribution(R: float, pX, W, aref: ReferenceFunctional, t) -> np.ndarray:
    """Index of the member that attains the shifted minimum at ``R + t``,
    i.e. the maximizer of ``alpha(p) - E_sp(R + t, p)``.  Ties go to the lowest index."""
    W = _as_class(W)
    p = _as_pmf(pX)
    al = aref.alpha(pX, W.members)
    vals = _shifted_esp(p, W.members, al, R + np.asarray(t, dtype=float))
    return _argext(vals, prefer_last=False)


def _argext(vals: np.ndarray, prefer_last: bool, tol: float = 1e-12) -> np.ndarray:
    best = vals.min(axis=0)
    near = vals <= best + tol
    idx = np.arange(vals.shape[0])[:, None]
    return np.where(near, idx, -1).max(axis=0) if prefer_last else np.where(near, idx, vals.shape[0]).min(axis=0)
