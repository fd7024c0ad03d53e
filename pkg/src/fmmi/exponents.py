"""Sphere-packing and weighted random-coding exponents.

The sphere-packing exponent of a single channel is computed through its
fixed-composition dual.  For a tilt parameter ``a = 1/(1+rho)`` in ``(0, 1]``
the minimizer of ``D(V||W|P) + rho * I(P, V)`` has the form
``V(y|x) ~ W(y|x)^a Q(y)^(1-a)`` where ``Q`` minimizes the convex function
``-sum_x P(x) log sum_y W(y|x)^a Q(y)^(1-a)`` over the simplex.  That tilted
channel gives a point ``(R, E) = (I(P,V), D(V||W|P))`` on the curve with
slope exactly ``-rho``.  Sweeping ``a`` traces the whole curve from
``R_inf`` (``a -> 0``) up to ``I(P, W)`` (``a = 1``).

Everything is in bits.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .probkit import (
    Channel,
    Composition,
    Pmf,
    _cond_kl_arr,
    _mi_from_counts,
    bsc,
    conditional_type_array,
    entropy,
    mutual_information,
)
from .weightfn import DEFAULT_KNOTS, WeightFn

__all__ = [
    "CompoundClass",
    "ExponentCurve",
    "CharacteristicRates",
    "NumericalError",
    "KinkWarning",
    "exponent_curve",
    "esp",
    "esp_compound",
    "esp_derivative",
    "esp_slopes",
    "characteristic_rates",
    "conjugate_rate",
    "conjugate_pair_from_gap",
    "erf",
    "f_R_builder",
    "esp_N_oracle",
    "erf_N_oracle",
]

LN2 = np.log(2.0)
A_MIN = 1e-6          # smallest tilt sampled; below it the curve is extended linearly
CURVE_TOL = 1e-10     # Hermite interpolation error target (bits)
KNOT_TOL = 1e-7       # chord error target for piecewise-linear weighting functions


class NumericalError(RuntimeError):
    """A solver failed to converge."""


class KinkWarning(UserWarning):
    """Left and right slopes of a compound exponent differ."""


# ---------------------------------------------------------------------------
# compound classes


class CompoundClass:
    """A family of channels: an explicit list, or a BSC crossover interval.

    ``members`` is the full (for intervals, discretized) family.  ``dominant``
    holds the members that realize the class minimum of any exponent that is
    monotone under channel degradation: for a BSC interval that is just the
    noisiest channel.
    """

    def __init__(self, channels: Sequence[Channel] | None = None, rho_interval=None, grid: int = 201):
        if (channels is None) == (rho_interval is None):
            raise ValueError("give either an explicit channel list or a BSC interval")
        if channels is not None:
            chans = tuple(c if isinstance(c, Channel) else Channel(c) for c in channels)
            if not chans:
                raise ValueError("compound class must be nonempty")
            if len({c.shape for c in chans}) != 1:
                raise ValueError("all channels in a class must share alphabets")
            self.kind = "explicit"
            self.rho_min = self.rho_max = None
            self.members = chans
            self.dominant = chans
        else:
            lo, hi = (float(r) for r in rho_interval)
            if not 0.0 < lo <= hi <= 0.5:
                raise ValueError("BSC interval must satisfy 0 < rho_min <= rho_max <= 1/2")
            self.kind = "bsc"
            self.rho_min, self.rho_max = lo, hi
            self.rhos = np.linspace(lo, hi, grid) if hi > lo else np.array([lo])
            self.members = tuple(bsc(r) for r in self.rhos)
            self.dominant = (bsc(hi),)

    @classmethod
    def explicit(cls, channels) -> "CompoundClass":
        return cls(channels=channels)

    @classmethod
    def bsc_interval(cls, rho_min: float, rho_max: float, grid: int = 201) -> "CompoundClass":
        return cls(rho_interval=(rho_min, rho_max), grid=grid)

    @property
    def shape(self):
        return self.members[0].shape

    def __len__(self):
        return len(self.members)

    def __repr__(self):
        if self.kind == "bsc":
            return f"CompoundClass(bsc=[{self.rho_min}, {self.rho_max}])"
        return f"CompoundClass({len(self.members)} channels)"


def _as_class(W) -> CompoundClass:
    if isinstance(W, CompoundClass):
        return W
    if isinstance(W, Channel):
        return CompoundClass.explicit([W])
    return CompoundClass.explicit([Channel(W)])


def _as_pmf(p) -> np.ndarray:
    return np.asarray(p.probs if isinstance(p, Pmf) else Pmf(p).probs)


# ---------------------------------------------------------------------------
# tilted-channel solver


class _Tilter:
    """Solves the inner minimization for a batch of tilt values."""

    def __init__(self, p: np.ndarray, W: np.ndarray):
        rows = p > 0
        self.p = p[rows]
        W = W[rows]
        cols = (W > 0).any(axis=0)
        self.W = W[:, cols]
        self.supp = self.W > 0
        self.logW = np.log(np.where(self.supp, self.W, 1.0))
        self.Y = self.W.shape[1]

    def _objective(self, Wa, Q, b):
        S = np.einsum("nxy,ny->nx", Wa, Q ** b[:, None])
        return -(self.p * np.log(S)).sum(axis=1)

    def solve(self, a) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(rate, divergence)`` arrays for tilt values ``a`` in (0, 1]."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        n, Y, p = a.size, self.Y, self.p
        b = 1.0 - a
        Wa = np.where(self.supp[None], np.exp(a[:, None, None] * self.logW[None]), 0.0)
        Q = np.tile(p @ self.W, (n, 1))
        for _ in range(3):
            num = Wa * Q[:, None, :] ** b[:, None, None]
            Q = np.einsum("x,nxy->ny", p, num / num.sum(-1, keepdims=True))
        active = b > 1e-14
        # coordinates whose weight Q^b is negligible are pinned at zero; near
        # a = 0 the optimum there is of order c^(1/a), far below float range
        free = np.ones((n, Y), dtype=bool)
        f = self._objective(Wa, Q, b)
        eye = np.eye(Y)
        for _ in range(200):
            if not active.any():
                break
            ix = np.nonzero(active)[0]
            Qa, ba, Waa, fr = Q[ix], b[ix], Wa[ix], free[ix]
            Qs = np.where(fr, Qa, 1.0)
            Qb = Qa ** ba[:, None]
            S = np.einsum("nxy,ny->nx", Waa, Qb)
            A = np.where(fr[:, None, :], Waa * (Qb / Qs)[:, None, :], 0.0)
            wA = np.einsum("nx,nxy->ny", p / S, A)
            g = -ba[:, None] * wA
            G = A * (np.sqrt(p) / S)[:, :, None]
            H = (ba ** 2)[:, None, None] * np.einsum("nxy,nxz->nyz", G, G)
            H += eye * ((ba * (1.0 - ba))[:, None] * wA / Qs + ~fr)[:, None, :]
            K = np.zeros((ix.size, Y + 1, Y + 1))
            K[:, :Y, :Y] = H
            K[:, :Y, Y] = fr
            K[:, Y, :Y] = fr
            rhs = np.zeros((ix.size, Y + 1))
            rhs[:, :Y] = -g
            try:
                dQ = np.linalg.solve(K, rhs[..., None])[..., 0][:, :Y]
            except np.linalg.LinAlgError:
                dQ = np.stack([np.linalg.lstsq(k, r, rcond=None)[0][:Y] for k, r in zip(K, rhs)])
            dQ = np.where(fr, dQ, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                lim = np.where(dQ < 0, -Qa / np.where(dQ < 0, dQ, -1.0), np.inf).min(axis=1)
            t = np.minimum(1.0, 0.99 * lim)
            slope = (g * dQ).sum(axis=1)
            fa = f[ix]
            for _ in range(60):
                Qn = np.where(fr, np.maximum(Qa + t[:, None] * dQ, 1e-300), 0.0)
                fn = self._objective(Waa, Qn, ba)
                bad = fn > fa + 1e-4 * t * slope + 4e-16 * (np.abs(fa) + 1.0)
                if not bad.any():
                    break
                t = np.where(bad, t * 0.5, t)
            tiny = fr & (Qn ** ba[:, None] < 1e-16) & (dQ < 0)
            Qn = np.where(tiny, 0.0, Qn)
            Qn /= Qn.sum(axis=1, keepdims=True)
            step = ba * np.max(np.abs(t[:, None] * dQ) / Qs, axis=1)
            Q[ix], f[ix], free[ix] = Qn, fn, fr & ~tiny
            # at tiny tilts the step bottoms out near eps/a; the decrement tells us we are done
            flat = (step < 1e-7) & (np.abs(slope) < 1e-15 * (np.abs(fa) + 1.0))
            done = ((step < 1e-13) | flat) & ~tiny.any(axis=1)
            active[ix[done]] = False
        else:
            raise NumericalError("tilted-channel solver did not converge")
        num = Wa * Q[:, None, :] ** b[:, None, None]
        V = num / num.sum(-1, keepdims=True)
        Qo = np.einsum("x,nxy->ny", p, V)
        with np.errstate(divide="ignore", invalid="ignore"):
            logV = np.log2(np.where(V > 0, V, 1.0))
            rate = np.einsum("x,nxy->n", p, V * (logV - np.log2(np.where(Qo > 0, Qo, 1.0))[:, None, :]))
            div = np.einsum("x,nxy->n", p, V * (logV - self.logW[None] / LN2))
        return np.maximum(rate, 0.0), np.maximum(div, 0.0)

    def min_rate(self) -> float:
        """Infimum of ``I(P, V)`` over channels absolutely continuous w.r.t. ``W``."""
        common = self.supp.all(axis=0)
        if common.any():
            # the limiting output law is the normalized geometric mean of the rows
            g = np.where(common, np.exp(self.p @ self.logW), 0.0)
            self.Q_inf = g / g.sum()
            return 0.0
        S = self.supp.astype(float)
        Q = np.full(self.Y, 1.0 / self.Y)
        prev = np.inf
        for _ in range(100000):
            mass = S @ Q
            val = -(self.p * np.log2(mass)).sum()
            if prev - val < 1e-15:
                break
            prev = val
            Q = np.einsum("x,xy->y", self.p / mass, S * Q)
        self.Q_inf = Q
        return float(val)

    def endpoint_divergence(self) -> tuple[float, float]:
        """``(rate, D(V0||W|P))`` for the zero-tilt limit ``V0 ~ 1{W>0} Q_inf``."""
        V = self.supp * self.Q_inf
        V = V / V.sum(axis=1, keepdims=True)
        q = self.p @ V
        with np.errstate(divide="ignore", invalid="ignore"):
            logV = np.log2(np.where(V > 0, V, 1.0))
            rate = (self.p[:, None] * V * (logV - np.log2(np.where(q > 0, q, 1.0)))).sum()
            div = (self.p[:, None] * V * (logV - self.logW / LN2)).sum()
        return float(max(rate, 0.0)), float(div)


# ---------------------------------------------------------------------------
# single-channel curves


class _ChannelCurve:
    """Adaptively sampled sphere-packing curve of one channel."""

    def __init__(self, p: np.ndarray, W: np.ndarray):
        self.tilter = _Tilter(p, W)
        self.I = mutual_information(p, W)
        r0 = self.tilter.min_rate()
        self.trivial = self.I - r0 < 1e-13
        if self.trivial:
            self.R_inf, self.E_inf = self.I, 0.0
            return
        a = np.concatenate([np.geomspace(A_MIN, 0.05, 24), np.linspace(0.05, 1.0, 40)[1:]])
        R, E = self.tilter.solve(a)
        R[-1], E[-1] = self.I, 0.0
        for _ in range(60):
            rho = 1.0 / a - 1.0
            gap = np.diff(R)
            keep = np.concatenate([[True], gap > 0])
            spline = CubicHermiteSpline(R[keep], E[keep], -rho[keep])
            geo = a[:-1] < 0.05
            am = np.where(geo, np.sqrt(a[:-1] * a[1:]), 0.5 * (a[:-1] + a[1:]))
            Rm_new, Em_new = self.tilter.solve(am)
            err = np.abs(spline(Rm_new) - Em_new)
            split = ((err > CURVE_TOL) | (gap > (self.I - r0) / 256)) & (gap > 0)
            split &= (a[1:] - a[:-1]) > 1e-12 * a[1:]
            if not split.any():
                break
            pos = np.nonzero(split)[0] + 1
            a = np.insert(a, pos, am[split])
            R = np.maximum.accumulate(np.insert(R, pos, Rm_new[split]))
            E = np.insert(E, pos, Em_new[split])
        keep = np.concatenate([[True], np.diff(R) > 0])
        a, R, E = a[keep], R[keep], E[keep]
        self.R_inf = min(r0, float(R[0]))
        rho = 1.0 / a - 1.0
        # the tangent at the smallest sampled tilt underestimates the endpoint;
        # the zero-tilt channel gives it exactly when it sits at rate R_inf
        self.E_inf = float(E[0] + rho[0] * (R[0] - self.R_inf))
        r_end, d_end = self.tilter.endpoint_divergence()
        if abs(r_end - self.R_inf) < 1e-9 and d_end >= self.E_inf - 1e-12:
            self.E_inf = max(d_end, float(E[0]))
        if R[0] > self.R_inf:
            a = np.concatenate([[0.0], a])
            R = np.concatenate([[self.R_inf], R])
            E = np.concatenate([[self.E_inf], E])
            rho = np.concatenate([[rho[0]], rho])
        self.a, self.R, self.E, self.rho = a, R, E, rho
        self.spline = CubicHermiteSpline(R, E, -rho)
        self.dspline = self.spline.derivative()

    # -- evaluation ---------------------------------------------------------

    def value(self, R):
        R = np.asarray(R, dtype=float)
        if self.trivial:
            out = np.where(R < self.R_inf - 1e-15, np.inf, 0.0)
        else:
            inside = np.clip(R, self.R_inf, self.I)
            out = np.where(R < self.R_inf, np.inf,
                           np.where(R >= self.I, 0.0, np.maximum(self.spline(inside), 0.0)))
        return out if out.ndim else float(out)

    def slope(self, R):
        """Interpolated derivative; ``-inf`` below ``R_inf``."""
        R = np.asarray(R, dtype=float)
        if self.trivial:
            out = np.where(R < self.R_inf, -np.inf, 0.0)
        else:
            inside = np.clip(R, self.R_inf, self.I)
            out = np.where(R < self.R_inf, -np.inf,
                           np.where(R >= self.I, 0.0, np.minimum(self.dspline(inside), 0.0)))
        return out if out.ndim else float(out)

    def tilt(self, a):
        """Exact curve points ``(R, E)`` at tilt values ``a``."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        R, E = np.empty(a.size), np.empty(a.size)
        one = a >= 1.0
        R[one], E[one] = self.I, 0.0
        if (~one).any():
            R[~one], E[~one] = self.tilter.solve(a[~one])
        return R, E

    def tilt_for_rate(self, R: float) -> float:
        """Tilt ``a`` whose tilted channel has rate ``R`` (``R_inf < R < I``)."""
        k = int(np.searchsorted(self.R, R))
        k = min(max(k, 1), self.R.size - 1)
        lo, hi = max(self.a[k - 1], A_MIN), self.a[k]
        if R <= self.tilt(lo)[0][0]:
            return lo
        return brentq(lambda x: self.tilt(x)[0][0] - R, lo, hi, xtol=1e-15, rtol=1e-15)

    def exact(self, R: float) -> tuple[float, float]:
        """``(E_sp(R), E_sp'(R))`` from the dual, without interpolation."""
        if R < self.R_inf:
            return np.inf, -np.inf
        if self.trivial or R >= self.I:
            return 0.0, 0.0
        a = self.tilt_for_rate(R)
        Ra, Ea = self.tilt(a)
        rho = 1.0 / a - 1.0
        return float(Ea[0] + rho * (Ra[0] - R)), -rho

    def slope_exact(self, R: float) -> float:
        return self.exact(R)[1]

    @property
    def R_cr(self) -> float:
        return self.I if self.trivial else float(self.tilt(0.5)[0][0])


_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def _channel_curve(p: np.ndarray, ch: Channel) -> _ChannelCurve:
    key = (p.tobytes(), ch.rows.shape, ch.rows.tobytes())
    with _CACHE_LOCK:
        hit = _CACHE.get(key)
    if hit is None:
        hit = _ChannelCurve(p, np.asarray(ch.rows))
        with _CACHE_LOCK:
            _CACHE[key] = hit
    return hit


# ---------------------------------------------------------------------------
# compound curves


@dataclass(frozen=True)
class CharacteristicRates:
    R_inf: float
    I_min: float
    R_cr: float


class ExponentCurve:
    """Sphere-packing exponent of a compound class as a function of rate."""

    def __init__(self, pX, W):
        self.p = _as_pmf(pX)
        self.W = _as_class(W)
        if self.W.shape[0] != self.p.size:
            raise ValueError(
                f"dimension mismatch: input pmf has {self.p.size} symbols, channels have {self.W.shape[0]} inputs")
        self.curves = [_channel_curve(self.p, c) for c in self.W.dominant]
        self.R_inf = min(c.R_inf for c in self.curves)
        self.I_min = min(c.I for c in self.curves)
        self.H = entropy(self.p)
        self._rcr = None

    def value(self, R):
        vals = np.stack([np.asarray(c.value(R), dtype=float) for c in self.curves])
        out = vals.min(axis=0)
        return out if out.ndim else float(out)

    def exact(self, R: float) -> float:
        return min(c.exact(R)[0] for c in self.curves)

    def slopes(self, R: float) -> tuple[float, float]:
        """``(left, right)`` derivatives at ``R``."""
        if R >= self.I_min:
            return 0.0, 0.0
        vals = [c.value(R) for c in self.curves]
        best = min(vals)
        if not np.isfinite(best) or R <= self.R_inf:
            raise ValueError(f"rate {R} is outside the differentiable range ({self.R_inf}, {self.I_min})")
        act = [c.slope_exact(R) for c, v in zip(self.curves, vals) if v <= best + 1e-9]
        return max(act), min(act)

    def slope(self, R: float, side: str = "right") -> float:
        left, right = self.slopes(R)
        if abs(left - right) > 1e-6:
            warnings.warn(f"compound exponent has a kink at R={R}: slopes {left} / {right}", KinkWarning)
        return right if side == "right" else left

    def slope_grid(self, R):
        """Interpolated derivative of the compound minimum on an array of rates."""
        R = np.asarray(R, dtype=float)
        vals = np.stack([c.value(R) for c in self.curves])
        sl = np.stack([c.slope(R) for c in self.curves])
        return np.take_along_axis(sl, vals.argmin(axis=0)[None], axis=0)[0]

    @property
    def R_cr(self) -> float:
        if self._rcr is None:
            self._rcr = self._critical_rate()
        return self._rcr

    def _active(self, k: int, R: float) -> bool:
        return self.curves[k].value(R) <= self.value(R) + 1e-9

    def _critical_rate(self) -> float:
        if self.I_min - self.R_inf < 1e-13:
            return self.I_min
        cands = [c.R_cr for k, c in enumerate(self.curves) if self._active(k, c.R_cr)]
        if cands:
            return float(min(cands))
        return self._slope_crossing(-1.0)

    def _slope_crossing(self, target: float, lo: float | None = None, hi: float | None = None) -> float:
        """Rate where the compound slope passes ``target`` (handles kinks)."""
        lo = self.R_inf if lo is None else lo
        hi = self.I_min if hi is None else hi
        grid = np.linspace(lo, hi, 2049)[1:-1]
        s = self.slope_grid(grid) - target
        idx = np.nonzero(np.diff(np.sign(s)) != 0)[0]
        if idx.size == 0:
            return float("nan")
        x0, x1 = grid[idx[0]], grid[idx[0] + 1]
        f = lambda x: self.slopes(x)[1] - target
        for _ in range(100):
            mid = 0.5 * (x0 + x1)
            if (f(mid) < 0) == (f(x0) < 0):
                x0 = mid
            else:
                x1 = mid
            if x1 - x0 < 1e-13:
                break
        return 0.5 * (x0 + x1)

    def is_convex(self, tol: float = 1e-8, n: int = 513) -> bool:
        if len(self.curves) == 1 or self.I_min - self.R_inf < 1e-12:
            return True
        x = np.linspace(self.R_inf, self.I_min, n)[1:]
        v = self.value(x)
        return bool(np.all(v[1:-1] <= 0.5 * (v[:-2] + v[2:]) + tol))

    def grid(self, n: int = 2049, hi: float | None = None):
        """Tabulate ``(rates, values, slopes)`` on ``n`` uniform rates in ``[0, hi]``."""
        hi = np.log2(self.W.shape[1]) if hi is None else hi
        R = np.linspace(0.0, hi, n)
        return R, self.value(R), self.slope_grid(R)

    def characteristic_rates(self) -> CharacteristicRates:
        return CharacteristicRates(self.R_inf, self.I_min, self.R_cr)

    # -- conjugacy ----------------------------------------------------------

    def conjugate_rate(self, R: float) -> float | None:
        if R >= self.I_min or R <= self.R_inf:
            return None
        s1 = self.slopes(R)[1]
        if s1 == 0.0:
            return None
        rho2 = -1.0 / s1
        a2 = 1.0 / (1.0 + rho2)
        cands = []
        for k, c in enumerate(self.curves):
            r2 = float(c.tilt(a2)[0][0])
            if self._active(k, r2):
                cands.append(r2)
        if len(cands) == 1:
            return cands[0]
        if cands:
            return max(cands) if R < self.R_cr else min(cands)
        lo, hi = (self.R_cr, self.I_min) if R < self.R_cr else (self.R_inf, self.R_cr)
        x = self._slope_crossing(1.0 / s1, lo, hi)
        return None if np.isnan(x) else x

    def conjugate_pair_from_gap(self, d: float) -> tuple[float, float]:
        d = abs(float(d))
        rcr = self.R_cr
        if d == 0.0:
            return rcr, rcr
        if len(self.curves) == 1:
            c = self.curves[0]
            gap = lambda a: float(np.diff(c.tilt([a, 1.0 - a])[0])[0])
            top = gap(A_MIN)
            if d > top + 1e-12:
                raise ValueError(f"gap {d} exceeds the attainable range {top}")
            if d >= top:
                a1 = A_MIN
            else:
                a1 = brentq(lambda a: gap(a) - d, A_MIN, 0.5, xtol=1e-15)
            r1, r2 = c.tilt([a1, 1.0 - a1])[0]
            return float(r1), float(r2)

        def g(r1):
            r2 = self.conjugate_rate(r1)
            return (self.I_min if r2 is None else r2) - r1 - d

        lo, hi = self.R_inf + 1e-12, rcr
        if g(lo) < 0:
            raise ValueError(f"gap {d} is not attainable")
        r1 = brentq(g, lo, hi, xtol=1e-13)
        return r1, self.conjugate_rate(r1)


def exponent_curve(pX, W) -> ExponentCurve:
    return ExponentCurve(pX, W)


# ---------------------------------------------------------------------------
# public operations


def esp(R, pX, ch):
    """Sphere-packing exponent of one channel at rate(s) ``R``."""
    if np.any(np.asarray(R) < 0):
        raise ValueError("rate must be nonnegative")
    ch = ch if isinstance(ch, Channel) else Channel(ch)
    return _channel_curve(_checked(pX, ch), ch).value(R)


def _checked(pX, ch: Channel) -> np.ndarray:
    p = _as_pmf(pX)
    if ch.n_inputs != p.size:
        raise ValueError(f"dimension mismatch: input pmf has {p.size} symbols, channel has {ch.n_inputs} inputs")
    return p


def esp_compound(R, pX, W):
    """Minimum of the sphere-packing exponent over a class."""
    return ExponentCurve(pX, W).value(R)


def esp_slopes(R: float, pX, W) -> tuple[float, float]:
    return ExponentCurve(pX, W).slopes(R)


def esp_derivative(R: float, pX, W, side: str = "right") -> float:
    """Derivative of the class exponent in ``R``; one-sided at kinks."""
    return ExponentCurve(pX, W).slope(R, side)


def characteristic_rates(pX, W) -> CharacteristicRates:
    return ExponentCurve(pX, W).characteristic_rates()


def conjugate_rate(R: float, pX, W) -> float | None:
    return ExponentCurve(pX, W).conjugate_rate(R)


def conjugate_pair_from_gap(d: float, pX, W) -> tuple[float, float]:
    return ExponentCurve(pX, W).conjugate_pair_from_gap(d)


def _erf_channel(c: _ChannelCurve, R: float, F: WeightFn) -> tuple[float, float]:
    if c.trivial:
        cand = np.array([c.I])
        vals = F(cand - R)
        return float(vals[0]), float(c.I)
    lo, hi = c.R_inf, c.I
    knots = F.t + R
    # R' - R can round past a jump knot; the neighbouring floats catch it
    pts = [c.R, np.clip(np.concatenate([knots, np.nextafter(knots, -np.inf),
                                        np.nextafter(knots, np.inf)]), lo, hi)]
    t, v = F.t, F.v
    seg = (np.diff(t) > 0) & np.isfinite(v[:-1]) & np.isfinite(v[1:])
    if seg.any():
        sig = (np.diff(v)[seg]) / np.diff(t)[seg]
        sig = np.unique(sig[sig > 0])
        if sig.size:
            Rt, _ = c.tilt(1.0 / (1.0 + sig))
            pts.append(Rt)
    cand = np.unique(np.concatenate(pts))
    with np.errstate(invalid="ignore"):
        total = c.value(cand) + F(cand - R)
    total = np.where(np.isnan(total), np.inf, total)
    k = int(np.argmin(total))
    return float(total[k]), float(cand[k])


def erf(R: float, pX, ch_or_W, F: WeightFn, return_argmin: bool = False):
    """``min over R' of E_sp(R') + F(R' - R)``, minimized over the class."""
    curve = ExponentCurve(pX, ch_or_W)
    best = (np.inf, np.nan)
    for c in curve.curves:
        val = _erf_channel(c, R, F)
        if val[0] < best[0]:
            best = val
    return best if return_argmin else best[0]


def adaptive_knots(f, lo: float, hi: float, n0: int = DEFAULT_KNOTS, tol: float = KNOT_TOL,
                   max_knots: int = 40000, extra=()) -> tuple[np.ndarray, np.ndarray]:
    """Knots for a piecewise-linear fit of ``f`` on ``[lo, hi]``: ``n0`` uniform
    knots plus ``extra``, then bisection wherever the midpoint deviates by more than ``tol``."""
    x = np.linspace(lo, hi, n0)
    extra = [e for e in extra if lo < e < hi]
    if extra:
        x = np.unique(np.concatenate([x, extra]))
    y = np.asarray(f(x), dtype=float)
    while x.size < max_knots:
        mid = 0.5 * (x[:-1] + x[1:])
        ym = np.asarray(f(mid), dtype=float)
        bad = np.abs(ym - 0.5 * (y[:-1] + y[1:])) > tol
        bad &= (x[1:] - x[:-1]) > 1e-12
        if not bad.any():
            break
        x = np.insert(x, np.nonzero(bad)[0] + 1, mid[bad])
        y = np.insert(y, np.nonzero(bad)[0] + 1, ym[bad])
    return x, y


def f_R_builder(R: float, pX, W, n_knots: int = DEFAULT_KNOTS) -> WeightFn:
    """``t -> E_sp(R) - E_sp(R + t)`` for the class, as a weighting function.

    Defined on ``[R_inf - R, H(pX) - R]``; ``-inf`` to the left of ``R_inf - R``.
    When ``R >= I_min`` the function is identically zero and ``params['flat']``
    is set.
    """
    curve = ExponentCurve(pX, W)
    H = curve.H
    e0 = curve.value(R)
    lo, top = curve.R_inf - R, curve.I_min - R
    params = {"R": R, "flat": bool(top <= 0)}
    if top <= 0 or not np.isfinite(e0):
        return WeightFn([-R, H - R], [0.0, 0.0], kind="custom", params=params)
    x, y = adaptive_knots(lambda t: e0 - curve.value(R + t), lo, top, n_knots, extra=(0.0,))
    if H - R > top:
        x, y = np.append(x, H - R), np.append(y, e0)
    left = -np.inf if lo > -R else None
    return WeightFn(x, y, left=left, kind="custom", params=params)


# ---------------------------------------------------------------------------
# finite-blocklength oracles


def _type_table(comp: Composition, ch):
    W = np.asarray(ch.rows if isinstance(ch, Channel) else ch, dtype=float)
    if len(comp.counts) != W.shape[0]:
        raise ValueError("composition and channel input alphabet disagree")
    counts = conditional_type_array(comp, W.shape[1])
    nx = np.asarray(comp.counts, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        V = np.where(nx[None, :, None] > 0, counts / np.where(nx > 0, nx, 1.0)[None, :, None], 0.0)
    D = _cond_kl_arr(V, W[None], comp.pmf)
    I = _mi_from_counts(counts)
    return counts, D, I


def esp_N_oracle(R: float, comp: Composition, ch, return_type: bool = False):
    """Exact minimum of ``D(V||W|P)`` over conditional types with empirical MI ``<= R``."""
    counts, D, I = _type_table(comp, ch)
    ok = I <= R + 1e-12
    if not ok.any():
        return (np.inf, None) if return_type else np.inf
    vals = np.where(ok, D, np.inf)
    k = int(np.argmin(vals))
    return (float(vals[k]), counts[k]) if return_type else float(vals[k])


def erf_N_oracle(R: float, comp: Composition, ch, F: WeightFn, return_type: bool = False):
    """Exact minimum of ``D(V||W|P) + F(I - R)`` over conditional types."""
    counts, D, I = _type_table(comp, ch)
    with np.errstate(invalid="ignore"):
        vals = D + np.asarray(F(I - R))
    vals = np.where(np.isnan(vals), np.inf, vals)
    k = int(np.argmin(vals))
    return (float(vals[k]), counts[k]) if return_type else float(vals[k])
