"""Lasso solver with KKT certificates and equicorrelation-set extraction.

The solver minimizes

    (1/2n) ||y - X beta||^2 + lam * ||beta||_1

by cyclic coordinate descent. Every fit carries the data needed to check
optimality: the residual, the largest KKT violation, and the equicorrelation
set ``E = {j : |X_j^T r| / n = lam}`` together with its signs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._cd import cd_lasso
from .core import DesignMatrix


@dataclass(frozen=True)
class LassoSettings:
    """Solver tolerances.

    Attributes
    ----------
    max_iterations : int
        Cap on coordinate sweeps (full and active-set sweeps both count).
    coord_tol : float
        Largest coefficient change allowed in the final full sweep.
    kkt_tol : float
        Absolute tolerance on ``|X_j^T r| / n - lam``; also defines
        membership of the equicorrelation set.
    active_tol : float
        ``|beta_j|`` above this counts as numerically nonzero.
    debug : bool
        Run one full sweep at a time and assert that the objective never
        increases. Slow; meant for tests.
    """

    max_iterations: int = 100000
    coord_tol: float = 1e-10
    kkt_tol: float = 1e-7
    active_tol: float = 1e-9
    debug: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        for name in ("coord_tol", "kkt_tol", "active_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


DEFAULT_SETTINGS = LassoSettings()


@dataclass(frozen=True)
class LassoFit:
    """A Lasso solution with its optimality certificate.

    ``active_set`` and ``signs`` are the equicorrelation set and signs
    recomputed from the residual, not the numeric support of ``beta``.
    ``support`` is the numeric support; ``support_mismatch`` flags when the
    two disagree (possible only on boundary cases in floating point).
    """

    beta: np.ndarray
    lam: float
    active_set: np.ndarray
    signs: np.ndarray
    residual: np.ndarray
    kkt_slack: float
    iterations: int
    converged: bool
    support: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    kkt_tol: float = DEFAULT_SETTINGS.kkt_tol

    @property
    def support_mismatch(self) -> bool:
        return not np.array_equal(self.support, self.active_set)


def soft_threshold(z, t):
    """``sign(z) * max(|z| - t, 0)``; works elementwise on arrays."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    out = np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def lasso_objective(X: DesignMatrix, y, beta, lam) -> float:
    r = np.asarray(y) - X.values @ beta
    return float(r @ r / (2 * X.n) + lam * np.abs(beta).sum())


def kkt_slack(X: DesignMatrix, residual, beta, lam, active_tol=DEFAULT_SETTINGS.active_tol) -> float:
    """Largest violation of the Lasso stationarity conditions.

    For ``|beta_j| > active_tol`` the correlation ``X_j^T r / n`` must equal
    ``lam * sign(beta_j)``; elsewhere it must lie in ``[-lam, lam]``.
    """
    c = X.values.T @ residual / X.n
    nz = np.abs(beta) > active_tol
    viol = np.maximum(np.abs(c) - lam, 0.0)
    viol[nz] = np.abs(c[nz] - lam * np.sign(beta[nz]))
    return float(viol.max()) if viol.size else 0.0


def _check_inputs(X: DesignMatrix, y, lam):
    if not isinstance(X, DesignMatrix):
        raise TypeError("X must be a DesignMatrix")
    if not X.normalized:
        raise ValueError("design must be column-normalized")
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.n:
        raise ValueError(f"y has length {y.shape[0]}, design has n = {X.n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite entries")
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be positive and finite, got {lam!r}")
    return y


def _equicorrelation_from_residual(X: DesignMatrix, residual, lam, tol):
    c = X.values.T @ residual / X.n
    E = np.flatnonzero(np.abs(np.abs(c) - lam) <= tol)
    return E, np.sign(c[E])


def _polish(Xv, y, lam, beta, settings) -> bool:
    """Jump to the exact solution implied by the current support and signs.

    On the true support ``A`` with signs ``s`` the stationarity conditions
    are linear: ``X_A^T X_A beta_A / n = X_A^T y / n - lam * s``. The
    candidate is accepted (and written into ``beta``) only if it keeps the
    signs, satisfies the KKT bound off ``A`` and does not raise the
    objective. Coordinate descent then certifies it.
    """
    n = Xv.shape[0]
    A = np.flatnonzero(beta != 0.0)
    if A.size == 0 or A.size > n:
        return False
    s = np.sign(beta[A])
    XA = Xv[:, A]
    G = XA.T @ XA / n
    rhs = XA.T @ y / n - lam * s
    try:
        bA = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.isfinite(bA)) or np.any(np.sign(bA) != s):
        return False
    cand = np.zeros_like(beta)
    cand[A] = bA
    r = y - Xv @ cand
    c = Xv.T @ r / n
    off = np.ones(beta.shape[0], dtype=bool)
    off[A] = False
    if np.any(np.abs(c[off]) > lam + settings.kkt_tol):
        return False
    r_old = y - Xv @ beta
    old = r_old @ r_old / (2 * n) + lam * np.abs(beta).sum()
    new = r @ r / (2 * n) + lam * np.abs(cand).sum()
    if new > old:
        return False
    beta[:] = cand
    return True


def _continuation_start(X, y, lam, settings):
    """Warm start for a cold solve: walk down from lambda_max in 10 steps per decade.

    Small penalties with ``p > n`` are slow from zero; the intermediate
    solutions keep the support small along the way.
    """
    lmax = lambda_max(X, y)
    beta = np.zeros(X.p)
    if settings.debug or lam >= 0.5 * lmax:
        return beta, 0
    steps = int(np.ceil(10 * np.log10(lmax / lam)))
    used = 0
    for mid in np.geomspace(lmax, lam, steps + 1)[1:-1]:
        fit = fit_lasso(X, y, mid, settings, beta_init=beta)
        beta = fit.beta
        used += fit.iterations
    return beta, used


def fit_lasso(X: DesignMatrix, y, lam, settings=None, beta_init=None) -> LassoFit:
    """Solve the Lasso at penalty ``lam`` by coordinate descent.

    Convergence requires both a final full sweep moving no coefficient by
    more than ``settings.coord_tol`` and a KKT slack below
    ``settings.kkt_tol``. If the sweep criterion is met first, the sweep
    tolerance is tightened and descent continues. A fit that runs out of
    iterations is returned with ``converged=False``.
    """
    settings = settings or DEFAULT_SETTINGS
    y = _check_inputs(X, y, lam)
    lam = float(lam)
    Xv = np.ascontiguousarray(X.values)
    colsq = np.einsum("ij,ij->j", Xv, Xv)

    used = 0
    if beta_init is None:
        beta, used = _continuation_start(X, y, lam, settings)
    else:
        beta = np.array(beta_init, dtype=np.float64)
        if beta.shape != (X.p,):
            raise ValueError(f"beta_init must have length {X.p}")
    r = y - Xv @ beta

    tol = settings.coord_tol
    chunk = 64
    converged = False
    obj = lasso_objective(X, y, beta, lam) if settings.debug else None
    while used < settings.max_iterations:
        if settings.debug:
            budget = 1
        else:
            budget = min(chunk, settings.max_iterations - used)
            chunk = min(2 * chunk, 1024)
        sweeps, swept = cd_lasso(Xv, colsq, lam, beta, r, budget, tol, settings.debug)
        used += sweeps
        if settings.debug:
            new = lasso_objective(X, y, beta, lam)
            assert new <= obj + 1e-12 * max(1.0, abs(obj)), (
                f"objective increased from {obj!r} to {new!r}")
            obj = new
        if not swept:
            if not settings.debug and _polish(Xv, y, lam, beta, settings):
                r = y - Xv @ beta
            continue
        r = y - Xv @ beta
        if kkt_slack(X, r, beta, lam, settings.active_tol) <= settings.kkt_tol:
            converged = True
            break
        if tol <= 1e-15:
            break
        tol *= 0.1

    r = y - Xv @ beta
    slack = kkt_slack(X, r, beta, lam, settings.active_tol)
    E, s = _equicorrelation_from_residual(X, r, lam, settings.kkt_tol)
    support = np.flatnonzero(np.abs(beta) > settings.active_tol)
    return LassoFit(
        beta=beta,
        lam=lam,
        active_set=E,
        signs=s,
        residual=r,
        kkt_slack=slack,
        iterations=used,
        converged=converged and slack <= settings.kkt_tol,
        support=support,
        kkt_tol=settings.kkt_tol,
    )


def equicorrelation(fit: LassoFit, X: DesignMatrix, y, tol=None):
    """Recompute ``(E, s)`` from the residual ``y - X beta``.

    ``E`` holds the indices whose absolute correlation with the residual is
    within ``tol`` of the penalty; ``s`` are the signs of those correlations.
    A coefficient left at exactly zero on the boundary is included.
    """
    tol = fit.kkt_tol if tol is None else tol
    r = np.asarray(y, dtype=np.float64) - X.values @ fit.beta
    return _equicorrelation_from_residual(X, r, fit.lam, tol)


def lambda_max(X: DesignMatrix, y) -> float:
    """Smallest penalty at which the Lasso solution is zero."""
    return float(np.abs(X.values.T @ np.asarray(y, dtype=np.float64)).max() / X.n)


def lasso_path(X: DesignMatrix, y, lambdas: Sequence[float], settings=None) -> list[LassoFit]:
    """Fits along a strictly decreasing penalty grid, each warm-started."""
    lambdas = np.asarray(lambdas, dtype=np.float64).ravel()
    if lambdas.size == 0:
        return []
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be strictly decreasing")
    fits = []
    beta = None
    for lam in lambdas:
        fit = fit_lasso(X, y, lam, settings, beta_init=beta)
        fits.append(fit)
        beta = fit.beta
    return fits
