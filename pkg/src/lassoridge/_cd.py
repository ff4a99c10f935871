"""Compiled coordinate-descent kernel for the Lasso."""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@numba.njit(cache=True, nogil=True)
def _update(X, colsq, lam, beta, r, j, n):
    """Exact minimization along coordinate j; updates beta and r in place."""
    cj = colsq[j] / n
    if cj == 0.0:
        return 0.0
    g = 0.0
    for i in range(n):
        g += X[i, j] * r[i]
    old = beta[j]
    new = _soft(g / n + cj * old, lam) / cj
    d = new - old
    if d != 0.0:
        beta[j] = new
        for i in range(n):
            r[i] -= d * X[i, j]
    return abs(d)


@numba.njit(cache=True, nogil=True)
def cd_lasso(X, colsq, lam, beta, r, max_sweeps, tol, full_only):
    """Cyclic coordinate descent with active-set cycling.

    Alternates a full sweep over all coordinates with repeated sweeps over
    the nonzero coordinates until those settle, and stops after a full sweep
    whose largest coefficient change is below ``tol``. ``beta`` and the
    residual ``r = y - X beta`` are updated in place.

    Returns ``(sweeps, converged)``.
    """
    n, p = X.shape
    sweeps = 0
    active = np.empty(p, dtype=np.int64)
    while sweeps < max_sweeps:
        dmax = 0.0
        for j in range(p):
            d = _update(X, colsq, lam, beta, r, j, n)
            if d > dmax:
                dmax = d
        sweeps += 1
        if dmax < tol:
            return sweeps, True
        if full_only:
            continue
        na = 0
        for j in range(p):
            if beta[j] != 0.0:
                active[na] = j
                na += 1
        while sweeps < max_sweeps:
            dmax = 0.0
            for k in range(na):
                d = _update(X, colsq, lam, beta, r, active[k], n)
                if d > dmax:
                    dmax = d
            sweeps += 1
            if dmax < tol:
                break
    return sweeps, False
