"""Closed forms for the binary symmetric channel with uniform input.

Everything is expressed through ``mu = 1/rho - 1``; the rate ``R`` maps to the
crossover ``rho_R = h2^{-1}(1 - R)`` of the test channel that sits exactly at
rate ``R``, and ``mu_R = 1/rho_R - 1`` grows from 1 to infinity as ``R`` goes
from 0 to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

__all__ = [
    "BscParams",
    "h2",
    "h2_inv",
    "rho_R",
    "mu_R",
    "capacity",
    "binary_kl",
    "esp_bsc",
    "esp_prime_bsc",
    "rcr_bsc",
    "conjugate_bsc",
    "UniversalityRegion",
    "universality_region_bsc",
]


def _xlog2x(x: float) -> float:
    return 0.0 if x <= 0 else x * math.log2(x)


def h2(x: float) -> float:
    """Binary entropy in bits."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("h2 needs x in [0, 1]")
    return -_xlog2x(x) - _xlog2x(1.0 - x)


def h2_inv(y: float) -> float:
    """The root of ``h2(x) = y`` in ``[0, 1/2]``, by bisection to 1e-12."""
    if not 0.0 <= y <= 1.0:
        raise ValueError("h2_inv needs y in [0, 1]")
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    return bisect(lambda x: h2(x) - y, 0.0, 0.5, xtol=1e-12, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class BscParams:
    rho: float

    def __post_init__(self):
        if not 0.0 < self.rho <= 0.5:
            raise ValueError("crossover probability must lie in (0, 1/2]")

    @property
    def mu(self) -> float:
        return 1.0 / self.rho - 1.0

    @property
    def capacity(self) -> float:
        return 1.0 - h2(self.rho)


def capacity(rho: float) -> float:
    return 1.0 - h2(rho)


def rho_R(R: float) -> float:
    if not 0.0 <= R <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    return h2_inv(1.0 - R)


def mu_R(R: float) -> float:
    r = rho_R(R)
    return math.inf if r == 0.0 else 1.0 / r - 1.0


def binary_kl(q: float, p: float) -> float:
    """``D(Bern(q) || Bern(p))`` in bits."""
    out = 0.0
    for a, b in ((q, p), (1.0 - q, 1.0 - p)):
        if a > 0:
            out += math.inf if b == 0 else a * math.log2(a / b)
    return out


def esp_bsc(R: float, rho: float) -> float:
    """Sphere-packing exponent ``D(rho_R || rho)``; zero at and above capacity."""
    BscParams(rho)
    if R < 0:
        raise ValueError("rate must be nonnegative")
    if R >= capacity(rho):
        return 0.0
    return binary_kl(rho_R(R), rho)


def esp_prime_bsc(R: float, rho: float) -> float:
    """``dE_sp/dR = -log(mu/mu_R) / log(mu_R)``; ``-inf`` at ``R = 0``, 0 above capacity."""
    mu = BscParams(rho).mu
    if R >= capacity(rho):
        return 0.0
    m = mu_R(R)
    if m <= 1.0:
        return -math.inf
    return -math.log(mu / m) / math.log(m)


def rcr_bsc(rho: float) -> float:
    """Critical rate, where the slope is -1: ``mu_R = sqrt(mu)``."""
    mu = BscParams(rho).mu
    return 1.0 - h2(1.0 / (1.0 + math.sqrt(mu)))


def conjugate_bsc(R: float, rho: float) -> float | None:
    """Rate whose slope is the reciprocal of the slope at ``R``: ``mu_conj = mu / mu_R``.

    ``None`` when ``mu / mu_R < 1`` (no conjugate below capacity).
    """
    mu = BscParams(rho).mu
    if R >= capacity(rho):
        raise ValueError("conjugate rate needs R below capacity")
    m = mu_R(R)
    ratio = mu / m
    if ratio < 1.0:
        return None
    return 1.0 - h2(1.0 / (1.0 + ratio))


@dataclass(frozen=True)
class UniversalityRegion:
    """Where the Csiszar-Korner rule attains Forney's exponents on a BSC interval."""

    R: float
    rho_min: float
    rho_max: float
    delta_range: tuple[float, float]
    nonempty: bool

    @property
    def mu_max(self) -> float:
        return 1.0 / self.rho_min - 1.0

    @property
    def mu_min(self) -> float:
        return 1.0 / self.rho_max - 1.0

    def lambda_range(self, delta: float) -> tuple[float, float] | None:
        """``[log(mu_max/mu_R)/log(mu_R), log(mu_{R+D})/log(mu_max/mu_{R+D})]``; ``None``
        when empty, which happens exactly when ``mu_max > mu_R * mu_{R+D}``."""
        mR = mu_R(self.R)
        lo = math.log(self.mu_max / mR) / math.log(mR) if mR > 1.0 else math.inf
        mRD = mu_R(min(self.R + delta, 1.0))
        denom = math.log(self.mu_max / mRD) if math.isfinite(mRD) else -math.inf
        hi = math.inf if denom <= 0 else math.log(mRD) / denom
        if lo > hi * (1 + 1e-12):
            return None
        return lo, hi

    def lambda_opt(self, delta: float) -> float:
        """``log(mu_{R+D}) / log(mu_R)``: the only feasible value when
        ``mu_max = mu_R * mu_{R+D}``."""
        return math.log(mu_R(self.R + delta)) / math.log(mu_R(self.R))

    def gate(self, delta: float) -> bool:
        """``mu_max <= mu_R * mu_{R+D}``."""
        return self.mu_max <= mu_R(self.R) * mu_R(min(self.R + delta, 1.0)) * (1 + 1e-12)


def universality_region_bsc(R: float, rho_min: float, rho_max: float) -> UniversalityRegion:
    """Closed-form Delta-range and its nonemptiness for the interval ``[rho_min, rho_max]``."""
    BscParams(rho_min)
    BscParams(rho_max)
    if rho_min > rho_max:
        raise ValueError("rho_min must not exceed rho_max")
    if R >= capacity(rho_max):
        raise ValueError("rate must lie below the capacity of the noisiest channel")
    mR = mu_R(R)
    mu_max = 1.0 / rho_min - 1.0
    mu_min = 1.0 / rho_max - 1.0
    lo = max(h2(1.0 / (1.0 + mR)) - h2(1.0 / (1.0 + mu_max / mR)), 0.0)
    hi = capacity(rho_max) - R
    nonempty = mu_max <= max(mR * mR, mR * mu_min) * (1 + 1e-12)
    return UniversalityRegion(R, rho_min, rho_max, (lo, hi), bool(nonempty))
