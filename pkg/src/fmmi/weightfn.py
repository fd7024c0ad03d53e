"""Monotone piecewise-linear weighting functions and their generalized inverses.

A ``WeightFn`` is a nondecreasing piecewise-linear function given by knots
``(t[k], v[k])``.  Repeated knot positions encode upward jumps; at a jump the
function takes the *lowest* value (the first knot with that position), which
is exactly the convention the inf-type inverse ``inf{t : F(t) >= u}``
produces.  Values of ``+inf``/``-inf`` are allowed at knots and in the two
constant extensions outside the knot range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["WeightFn"]

DEFAULT_KNOTS = 513


def _as_array(x) -> np.ndarray:
    a = np.array(x, dtype=float).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightFn:
    t: np.ndarray
    v: np.ndarray
    left: float | None = None
    right: float | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        t, v = _as_array(self.t), _as_array(self.v)
        if t.size == 0 or t.shape != v.shape:
            raise ValueError("knot arrays must be nonempty and of equal length")
        if np.any(np.isnan(t)) or np.any(np.isnan(v)) or np.any(~np.isfinite(t)):
            raise ValueError("knot positions must be finite and values non-NaN")
        if np.any(np.diff(t) < 0):
            raise ValueError("knot positions must be nondecreasing")
        with np.errstate(invalid="ignore"):
            decreasing = np.any(np.diff(v) < -1e-12)
        if decreasing:
            raise ValueError("weighting functions must be nondecreasing")
        v = _as_array(np.maximum.accumulate(v))
        left = v[0] if self.left is None else float(self.left)
        right = v[-1] if self.right is None else float(self.right)
        if left > v[0] or right < v[-1]:
            raise ValueError("extensions must keep the function nondecreasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    # -- constructors -------------------------------------------------------

    @classmethod
    def threshold(cls, delta: float, lo: float, hi: float) -> "WeightFn":
        """``F(t) = delta``: plain thresholding of the empirical MI."""
        return cls([lo, hi], [delta, delta], kind="threshold", params={"delta": delta})

    @classmethod
    def ck(cls, delta: float, lam: float, lo: float, hi: float) -> "WeightFn":
        """``F(t) = delta + lam * max(t, 0)``."""
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        t = [lo, hi] if lo >= 0 else ([lo, 0.0, hi] if hi > 0 else [lo, hi])
        v = [delta + lam * max(s, 0.0) for s in t]
        return cls(t, v, kind="ck", params={"delta": delta, "lam": lam})

    @classmethod
    def linear(cls, offset: float, slope: float, lo: float, hi: float) -> "WeightFn":
        """``F(t) = offset + slope * t`` on ``[lo, hi]``."""
        return cls([lo, hi], [offset + slope * lo, offset + slope * hi],
                   kind="linear", params={"offset": offset, "slope": slope})

    @classmethod
    def identity(cls, lo: float, hi: float) -> "WeightFn":
        return cls.linear(0.0, 1.0, lo, hi)

    @classmethod
    def hinge(cls, a: float, delta: float, lo: float, hi: float) -> "WeightFn":
        """``F(t) = a * max(t - delta, 0)``."""
        knots = sorted({lo, min(max(delta, lo), hi), hi})
        return cls(knots, [a * max(s - delta, 0.0) for s in knots],
                   kind="hinge", params={"a": a, "delta": delta})

    @classmethod
    def from_callable(cls, f, knots, kind="custom", **params) -> "WeightFn":
        knots = np.asarray(knots, dtype=float)
        return cls(knots, np.asarray(f(knots), dtype=float), kind=kind, params=params)

    # -- evaluation ---------------------------------------------------------

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        t, v = self.t, self.v
        k = np.clip(np.searchsorted(t, x, side="left"), 1, t.size - 1) if t.size > 1 else np.zeros(x.shape, int)
        if t.size == 1:
            out = np.where(x < t[0], self.left, np.where(x > t[0], self.right, v[0]))
            return out if out.ndim else float(out)
        t0, t1 = t[k - 1], t[k]
        v0, v1 = v[k - 1], v[k]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(t1 > t0, (x - t0) / np.where(t1 > t0, t1 - t0, 1.0), 1.0)
            interp = np.where(frac <= 0, v0, np.where(frac >= 1, v1, v0 + frac * (v1 - v0)))
        # exact hit on a knot: take the first (lowest) knot at that position
        first = np.searchsorted(t, x, side="left")
        hit = (first < t.size) & (t[np.minimum(first, t.size - 1)] == x)
        out = np.where(hit, v[np.minimum(first, t.size - 1)], interp)
        out = np.where(x < t[0], self.left, np.where(x > t[-1], self.right, out))
        return out if out.ndim else float(out)

    def inverse(self) -> "WeightFn":
        """Generalized inverse ``u -> inf{t : F(t) >= u}``.

        ``-inf`` where every ``t`` qualifies, ``+inf`` where none does.
        """
        us, ts = [], []
        left = self.left
        if np.isfinite(left):
            us.append(left)
            ts.append(-np.inf)
            if left < self.v[0]:
                us.append(left)
                ts.append(self.t[0])
            inv_left = -np.inf
        else:
            inv_left = self.t[0]
        us.extend(self.v)
        ts.extend(self.t)
        if self.right > self.v[-1]:
            if np.isfinite(self.right):
                us.append(self.right)
                ts.append(self.t[-1])
                inv_right = np.inf
            else:
                inv_right = self.t[-1]
        else:
            inv_right = np.inf
        us = np.asarray(us)
        ts = np.asarray(ts)
        finite = np.isfinite(us)
        return WeightFn(us[finite], ts[finite], left=inv_left, right=inv_right, kind="inverse")

    def positive_part(self) -> "WeightFn":
        """``max(F, 0)`` with zero-crossing knots inserted."""
        t, v = list(self.t), list(self.v)
        nt, nv = [t[0]], [max(v[0], 0.0)]
        for k in range(1, len(t)):
            a, b = v[k - 1], v[k]
            if a < 0 < b and t[k] > t[k - 1] and np.isfinite(a):
                z = t[k - 1] + (0 - a) / (b - a) * (t[k] - t[k - 1])
                nt.append(z)
                nv.append(0.0)
            nt.append(t[k])
            nv.append(max(b, 0.0))
        return WeightFn(nt, nv, left=max(self.left, 0.0), right=max(self.right, 0.0),
                        kind=self.kind + "+", params=dict(self.params))

    def shift(self, c: float) -> "WeightFn":
        """``F + c``."""
        return WeightFn(self.t, self.v + c, left=self.left + c, right=self.right + c,
                        kind=self.kind, params=dict(self.params))

    def maximum(self, other: "WeightFn") -> "WeightFn":
        """Pointwise maximum of two continuous weighting functions."""
        for f in (self, other):
            if np.any(np.diff(f.t) == 0) or not np.all(np.isfinite(f.v)):
                raise ValueError("maximum() requires continuous finite weighting functions")
        grid = np.union1d(self.t, other.t)
        a, b = self(grid), other(grid)
        diff = a - b
        cross = []
        for k in range(1, grid.size):
            if diff[k - 1] * diff[k] < 0:
                w = diff[k - 1] / (diff[k - 1] - diff[k])
                cross.append(grid[k - 1] + w * (grid[k] - grid[k - 1]))
        knots = np.union1d(grid, cross)
        vals = np.maximum(self(knots), other(knots))
        return WeightFn(knots, vals, left=max(self.left, other.left), right=max(self.right, other.right))

    def dominates(self, other: "WeightFn", tol: float = 0.0) -> bool:
        """``self >= other`` on the union of both knot sets."""
        grid = np.union1d(self.t, other.t)
        return bool(np.all(self(grid) >= other(grid) - tol))

    def t_F(self, upper: float) -> float:
        """Breakpoint ``t_F``: the largest ``t <= upper`` up to which ``max(F, 0)``
        stays at its left-tail value."""
        if self(upper) < 0:
            raise ValueError("t_F is defined only when F(H(pX) - R) >= 0")
        pos = self.positive_part()
        base = pos.left
        above = np.nonzero(pos.v > base + 1e-12)[0]
        if above.size == 0:
            return float(upper)
        k = above[0]
        tf = pos.t[k - 1] if k > 0 else pos.t[0]
        return float(min(tf, upper))

    def __repr__(self):
        return f"WeightFn(kind={self.kind!r}, knots={self.t.size}, domain={self.domain})"


def compute_tF(F: WeightFn, R: float, HpX: float) -> float:
    """``t_F`` on the domain ``[-R, H(pX) - R]``."""
    return F.t_F(HpX - R)
