"""Independent reference computations used by the tests.

None of these share code with the package's solvers.
"""

import math

import numpy as np
from scipy.optimize import minimize, minimize_scalar


def gallager_e0(rho, W, p):
    """Gallager's function in bits for input ``p``."""
    W = np.asarray(W, float)
    inner = (p[:, None] * W ** (1.0 / (1.0 + rho))).sum(axis=0)
    return -math.log2((inner ** (1.0 + rho)).sum())


def esp_symmetric(R, W, p):
    """``sup over rho >= 0 of E0(rho) - rho R``; exact for symmetric channels
    with uniform input."""
    res = minimize_scalar(lambda r: -(gallager_e0(r, W, p) - r * R), bounds=(0.0, 200.0),
                          method="bounded", options={"xatol": 1e-12})
    return max(-res.fun, 0.0)


def er_symmetric(R, W, p):
    """Random-coding exponent ``max over 0 <= rho <= 1``."""
    res = minimize_scalar(lambda r: -(gallager_e0(r, W, p) - r * R), bounds=(0.0, 1.0),
                          method="bounded", options={"xatol": 1e-12})
    return max(-res.fun, gallager_e0(1.0, W, p) - R, 0.0)


def _mi(p, V):
    q = p @ V
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(V > 0, p[:, None] * V * np.log2(V / q[None, :]), 0.0)
    return t.sum()


def _ckl(p, V, W):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(V > 0, p[:, None] * V * np.log2(V / W), 0.0)
    return t.sum()


def esp_primal(R, W, p, starts=6, seed=0):
    """Minimize ``D(V||W|p)`` subject to ``I(p, V) <= R`` with SLSQP from random starts."""
    W = np.asarray(W, float)
    nx, ny = W.shape
    rng = np.random.default_rng(seed)

    def unpack(z):
        V = np.abs(z.reshape(nx, ny)) + 1e-300
        return V / V.sum(axis=1, keepdims=True)

    best = math.inf
    for k in range(starts):
        if k == 0:
            z0 = np.tile(p @ W, (nx, 1)).ravel()
        else:
            z0 = rng.dirichlet(np.ones(ny), size=nx).ravel()
        res = minimize(lambda z: _ckl(p, unpack(z), W), z0, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": lambda z: R - _mi(p, unpack(z))}],
                       options={"ftol": 1e-14, "maxiter": 500})
        V = unpack(res.x)
        if _mi(p, V) <= R + 1e-7:
            best = min(best, _ckl(p, V, W))
    return best


# --- BSC closed forms, written independently of the package ---

def _h2(x):
    return 0.0 if x in (0.0, 1.0) else -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def bsc_esp(R, rho):
    """``D(q || rho)`` with ``h2(q) = 1 - R``, ``q <= 1/2``; zero above capacity."""
    if R >= 1 - _h2(rho):
        return 0.0
    if R <= 0:
        q = 0.5
    else:
        from scipy.optimize import brentq
        q = brentq(lambda x: _h2(x) - (1 - R), 1e-300, 0.5, xtol=1e-15, rtol=1e-15)
    return q * math.log2(q / rho) + (1 - q) * math.log2((1 - q) / (1 - rho))


def bsc_esp_inverse(e, rho):
    """Rate in ``[0, C]`` where the exponent equals ``e`` (``e <= E(0)``)."""
    from scipy.optimize import brentq
    C = 1 - _h2(rho)
    if e <= 0:
        return C
    return brentq(lambda r: bsc_esp(r, rho) - e, 0.0, C, xtol=1e-14, rtol=1e-15)


def bsc_h_scan(R, delta, rho, n=4001):
    """``min over R' >= R + delta of E(R') + Finv(R' - R - delta)`` where
    ``F(t) = E(R) - E(R + t)``; a plain grid scan refined by a bounded search."""
    C = 1 - _h2(rho)
    eR = bsc_esp(R, rho)

    def h(r):
        u = r - R - delta
        if u > eR:
            return math.inf
        return bsc_esp(r, rho) + (bsc_esp_inverse(eR - u, rho) - R)

    lo = max(R + delta, 0.0)
    hi = min(C, R + delta + eR)
    grid = np.linspace(lo, hi, n)
    vals = np.array([h(r) for r in grid])
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n - 1)]
    res = minimize_scalar(h, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    return min(vals[k], res.fun)
