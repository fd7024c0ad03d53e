"""Optimal weighting functions and the incorrect-message / erasure tradeoff.

Given a rate ``R``, an input pmf and a channel class, the decoder designer
asks for an incorrect-message exponent of at least ``alpha`` and wants the
largest erasure exponent compatible with it.  ``optimal_F_list`` builds the
weighting function that is pointwise smallest among those meeting the
``alpha`` constraint, and ``optimal_exponents`` reports the resulting pair.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .exponents import (
    CompoundClass,
    ExponentCurve,
    _as_class,
    _as_pmf,
    _channel_curve,
    adaptive_knots,
    erf,
)
from .probkit import Channel, Pmf, bsc
from .weightfn import DEFAULT_KNOTS, WeightFn, compute_tF

__all__ = [
    "WeightFn",
    "compute_tF",
    "ProblemSpec",
    "ExponentPair",
    "UniversalityReport",
    "optimal_F_list",
    "optimal_F_single",
    "exponent_pair",
    "exponent_pair_for_channel",
    "optimal_exponents",
    "h_scan",
    "ck_lambda_range",
    "universality_check",
    "forney_exponents",
]

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class ProblemSpec:
    """Rate, input pmf, channel class and required incorrect-message exponent."""

    R: float
    pX: Pmf
    W: CompoundClass
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "pX", self.pX if isinstance(self.pX, Pmf) else Pmf(self.pX))
        object.__setattr__(self, "W", _as_class(self.W))
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.R < 0:
            raise ValueError("rate must be nonnegative")

    @classmethod
    def from_delta(cls, R: float, pX, W, delta: float) -> "ProblemSpec":
        W = _as_class(W)
        return cls(R, pX, W, ExponentCurve(pX, W).value(R) + delta)

    @property
    def curve(self) -> ExponentCurve:
        return ExponentCurve(self.pX, self.W)

    @property
    def delta(self) -> float:
        """Slack ``alpha - E_sp(R)``."""
        return self.alpha - self.curve.value(self.R)


@dataclass
class ExponentPair:
    E_i: float
    E_erase: float
    regime: str = "custom"
    info: dict = field(default_factory=dict)

    def as_tuple(self) -> tuple[float, float]:
        return self.E_i, self.E_erase


def _domain(spec_R: float, curve: ExponentCurve) -> tuple[float, float]:
    return -spec_R, curve.H - spec_R


def optimal_F_list(spec: ProblemSpec, n_knots: int = DEFAULT_KNOTS) -> WeightFn:
    """Smallest weighting function whose incorrect-message exponent is ``alpha``.

    ``alpha - E_sp(R + t)`` for ``t >= 0``; the constant ``Delta`` for ``t <= 0``.
    """
    curve = spec.curve
    R, alpha = spec.R, spec.alpha
    e0 = curve.value(R)
    if not np.isfinite(e0):
        raise ValueError(f"rate {R} is below R_inf = {curve.R_inf}; the exponent is infinite")
    delta = alpha - e0
    lo, hi = _domain(R, curve)
    params = {"R": R, "alpha": alpha, "delta": delta}
    top = curve.I_min - R
    if top <= 0:
        return WeightFn.threshold(delta, lo, hi)
    x, y = adaptive_knots(lambda t: alpha - curve.value(R + t), 0.0, top, n_knots)
    y[0] = delta
    x = np.concatenate([[lo], x])
    y = np.concatenate([[delta], y])
    if hi > top:
        x, y = np.append(x, hi), np.append(y, alpha)
    return WeightFn(x, y, kind="optimal-list", params=params)


def optimal_F_single(spec: ProblemSpec, n_knots: int = DEFAULT_KNOTS) -> WeightFn:
    """``max(t, F_list(t))``: the optimum when at most one message may be output."""
    FL = optimal_F_list(spec, n_knots)
    lo, hi = FL.domain
    out = FL.maximum(WeightFn.identity(lo, hi))
    return WeightFn(out.t, out.v, kind="optimal-single", params=dict(FL.params))


def exponent_pair(R: float, pX, ch_or_W, F: WeightFn) -> ExponentPair:
    """Incorrect-message and erasure exponents of the weighted-MMI rule with ``F``."""
    E_i = erf(R, pX, ch_or_W, F)
    E_e = erf(R, pX, ch_or_W, F.inverse().positive_part())
    return ExponentPair(E_i, E_e, regime=F.kind)


def exponent_pair_for_channel(R: float, pX, ch: Channel, F: WeightFn) -> ExponentPair:
    return exponent_pair(R, pX, ch if isinstance(ch, Channel) else Channel(ch), F)


# ---------------------------------------------------------------------------
# regimes


def _inverse_exponent(curve: ExponentCurve, e):
    """Smallest rate at which the class exponent drops to ``e`` (vectorized bisection)."""
    e = np.asarray(e, dtype=float)
    lo = np.full(e.shape, curve.R_inf)
    hi = np.full(e.shape, curve.I_min)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        above = curve.value(mid) > e
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return hi


def _fr_inverse(curve: ExponentCurve, R: float, u):
    """Inverse of ``t -> E_sp(R) - E_sp(R + t)`` with ``+-inf`` outside its range."""
    u = np.asarray(u, dtype=float)
    e0 = curve.value(R)
    bottom = e0 - curve.value(curve.R_inf)
    t = _inverse_exponent(curve, np.clip(e0 - u, 0.0, None)) - R
    out = np.where(u > e0, np.inf, np.where(u <= bottom, -np.inf if curve.R_inf > 0 else curve.R_inf - R, t))
    return out if out.ndim else float(out)


def h_scan(R: float, delta: float, curve: ExponentCurve, n: int = 4001) -> tuple[float, float]:
    """``min over R' >= R + delta of E_sp(R') + F_R^{-1}(R' - R - delta)``.

    Returns ``(value, argmin)``: a dense scan refined by bounded Brent search.
    """
    e0 = curve.value(R)
    lo = R + delta
    hi = min(R + delta + e0, max(curve.I_min, lo))
    if hi <= lo:
        return float(curve.value(lo)), lo
    h = lambda r: curve.value(r) + _fr_inverse(curve, R, np.asarray(r) - R - delta)
    grid = np.linspace(lo, hi, n)
    vals = h(grid)
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n - 1)]
    best = (float(vals[k]), float(grid[k]))
    if b > a:
        res = minimize_scalar(lambda r: float(h(r)), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12})
        if res.fun < best[0]:
            best = (float(res.fun), float(res.x))
    return best


def _closed_form(curve: ExponentCurve, R: float, delta: float, regime: str) -> float:
    r1, r2 = curve.conjugate_pair_from_gap(delta)
    if regime == "II":
        return float(curve.value(r2) + _fr_inverse(curve, R, r1 - R))
    return float(curve.value(r1) + _fr_inverse(curve, R, r2 - R))


def optimal_exponents(spec: ProblemSpec, crosscheck: bool = True) -> ExponentPair:
    """Optimal ``(E_i, E_erase)`` at the required ``alpha``, with the regime tag.

    Regimes: ``threshold`` (rate at or above ``I_min``), ``I`` (large slack,
    erasure exponent ``E_sp(R + Delta)``), ``II`` (``R <= R_cr``, small
    nonnegative slack), ``III`` (``R <= R_cr``, negative slack), and
    ``direct`` when no closed regime applies or the class exponent is not
    convex.  ``II``/``III``/``direct`` values come from minimizing ``h``.
    """
    curve = spec.curve
    R, alpha = spec.R, spec.alpha
    delta = spec.delta
    info: dict = {"delta": delta}
    if R >= curve.I_min:
        return ExponentPair(alpha, 0.0, "threshold", info)
    if not (curve.R_inf - R - BOUNDARY_TOL <= delta <= curve.I_min - R + BOUNDARY_TOL):
        raise ValueError(f"Delta={delta} outside [{curve.R_inf - R}, {curve.I_min - R}]")
    conj = curve.conjugate_rate(R)
    info["R_conj"] = conj
    lower = max((conj if conj is not None else R) - R, 0.0)
    rcr = curve.R_cr
    convex = curve.is_convex()
    if not convex:
        regime = "direct"
        warnings.warn("class exponent is not convex; reporting the direct scan", RuntimeWarning)
    elif lower - BOUNDARY_TOL <= delta:
        regime = "I"
    elif R <= rcr and delta >= 0:
        regime = "II"
    elif R <= rcr:
        regime = "III"
    else:
        regime = "direct"
    if regime == "I":
        E_e = float(curve.value(min(R + delta, curve.I_min)))
    else:
        E_e, arg = h_scan(R, delta, curve)
        info["argmin"] = arg
        if regime in ("II", "III"):
            info["closed_form"] = _closed_form(curve, R, delta, regime)
    if crosscheck:
        pair = exponent_pair(R, spec.pX, spec.W, optimal_F_list(spec))
        info["erf_check"] = pair.as_tuple()
    return ExponentPair(alpha, E_e, regime, info)


def ck_lambda_range(spec: ProblemSpec) -> tuple[float, float] | None:
    """Range of ``lambda`` for which ``Delta + lambda |t|^+`` is optimal."""
    curve = spec.curve
    R, delta = spec.R, spec.delta
    lam_lo = -curve.slope(R)
    s_hi = curve.slope(R + delta) if R + delta < curve.I_min else 0.0
    lam_hi = np.inf if s_hi == 0.0 else -1.0 / s_hi
    if lam_lo > lam_hi * (1 + 1e-12):
        return None
    return float(lam_lo), float(lam_hi)


@dataclass
class UniversalityReport:
    universal: bool
    delta_ok: bool
    lambda_ok: bool
    delta_range: tuple[float, float]
    lambda_range: tuple[float, float]
    per_channel: list


def _member_slope(p: np.ndarray, ch: Channel, R: float) -> float:
    return _channel_curve(p, ch).exact(R)[1]


def _member_conj(p: np.ndarray, ch: Channel, R: float) -> float:
    c = _channel_curve(p, ch)
    if R >= c.I or R <= c.R_inf:
        return R
    s = c.exact(R)[1]
    a2 = 1.0 / (1.0 - 1.0 / s)
    return max(R, float(c.tilt(a2)[0][0]))


def universality_check(spec: ProblemSpec, delta: float, lam: float, fast: bool = False) -> UniversalityReport:
    """Whether the CK rule ``delta + lam |t|^+`` attains Forney's pair for every member.

    With ``fast`` a BSC interval is represented by its two endpoints, which
    carry the extreme slopes and conjugate rates.
    """
    p = _as_pmf(spec.pX)
    W = spec.W
    R = spec.R
    curve = spec.curve
    members = W.members
    if fast and W.kind == "bsc":
        members = (bsc(W.rho_min), bsc(W.rho_max))
    slopes_R = [_member_slope(p, ch, R) for ch in members]
    slopes_RD = [_member_slope(p, ch, R + delta) for ch in members]
    rconj_bar = max(_member_conj(p, ch, R) for ch in members)
    d_lo, d_hi = max(rconj_bar - R, 0.0), curve.I_min - R
    e_lo = min(slopes_R)
    e_hi = min(slopes_RD)
    l_lo = -e_lo
    l_hi = np.inf if e_hi == 0.0 else -1.0 / e_hi
    delta_ok = d_lo - 1e-12 <= delta <= d_hi + 1e-12
    lambda_ok = l_lo * (1 - 1e-12) <= lam <= l_hi * (1 + 1e-12)
    per = []
    for ch in members:
        c = _channel_curve(p, ch)
        per.append((ch, (float(c.value(R)) + delta, float(c.value(R + delta)))))
    return UniversalityReport(bool(delta_ok and lambda_ok), bool(delta_ok), bool(lambda_ok),
                              (d_lo, d_hi), (l_lo, l_hi), per)


def forney_exponents(R: float, delta: float, pX, ch) -> ExponentPair:
    """Forney's pair ``(E_sp(R) + Delta, E_sp(R + Delta))`` for a known channel."""
    curve = ExponentCurve(pX, ch)
    conj = curve.conjugate_rate(R)
    ok = (conj is None or conj <= R + delta + 1e-12) and R + delta <= curve.I_min + 1e-12
    if not ok:
        warnings.warn("Forney pair evaluated outside its validity window", RuntimeWarning)
    return ExponentPair(float(curve.value(R)) + delta, float(curve.value(R + delta)), "forney",
                        {"in_window": bool(ok), "R_conj": conj})
