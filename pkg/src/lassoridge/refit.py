"""Lasso-Ridge refitting.

Given a Lasso fit with equicorrelation set ``E`` and signs ``s``, the
correction ``delta`` is the ridge solution of the Lasso residual on the
columns in ``E``:

    delta = argmin_{delta_{-E} = 0} (1/2n) ||r - X delta||^2 + (lam_r/2) ||delta||^2

and the refitted estimator is ``beta_r = beta_lasso + delta``. Using the
Lasso stationarity condition ``X_E^T r / n = lam_l * s`` the nonzero block
solves ``(Sigma_E + lam_r I) delta_E = lam_l * s`` with
``Sigma_E = X_E^T X_E / n``.

For ``lam_r > 2 ||Sigma_E||_inf`` the refit keeps the Lasso signs and does
not increase the in-sample prediction error whenever
``lam_l >= 3 ||X^T eps / n||_inf``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .core import DesignMatrix, TrueModel, infinity_operator_norm, restricted_gram
from .lasso import LassoFit

SIGN_ZERO_TOL = 1e-12
SAFE_MARGIN = 1e-6


class RefitError(RuntimeError):
    pass


@dataclass(frozen=True)
class RefitResult:
    delta: np.ndarray
    beta_r: np.ndarray
    lambda_r: float
    min_safe_lambda_r: float
    safe: bool
    method: str

    @property
    def active_set(self):
        return np.flatnonzero(self.delta)


class ImprovementCertificate(NamedTuple):
    """Both sides of the pointwise prediction-improvement inequality.

    ``lhs_gap`` is ``(1/2n)(||X(beta_l - beta0)||^2 - ||X(beta_r - beta0)||^2)``
    and ``remainder`` is ``(lam_r / (2 lam_l)) (lam_l - 3 noise_sup) ||delta||^2``.
    """

    lhs_gap: float
    remainder: float
    noise_sup: float
    condition_met: bool
    safe: bool

    @property
    def holds(self) -> bool:
        """The inequality where it is guaranteed; vacuously true elsewhere."""
        if not (self.safe and self.condition_met):
            return True
        return self.lhs_gap >= self.remainder - 1e-9


def min_safe_lambda_r(X: DesignMatrix, E) -> float:
    """``2 ||X_E^T X_E / n||_inf``, zero for an empty set."""
    return 2.0 * infinity_operator_norm(restricted_gram(X, E)) if len(E) else 0.0


def default_lambda_r(X: DesignMatrix, E) -> float:
    """Smallest safe ridge penalty, with a relative margin of 1e-6.

    Falls back to 1 when ``E`` is empty, where the penalty has no effect.
    """
    m = min_safe_lambda_r(X, E)
    return m * (1.0 + SAFE_MARGIN) if m > 0 else 1.0


def _assemble(X, fit, delta_E, lambda_r, method):
    E = np.asarray(fit.active_set, dtype=np.intp)
    delta = np.zeros(X.p)
    delta[E] = delta_E
    msafe = min_safe_lambda_r(X, E)
    return RefitResult(
        delta=delta,
        beta_r=fit.beta + delta,
        lambda_r=float(lambda_r),
        min_safe_lambda_r=msafe,
        safe=bool(lambda_r > msafe),
        method=method,
    )


def _check_lambda_r(lambda_r):
    if not (np.isfinite(lambda_r) and lambda_r > 0):
        raise ValueError(f"lambda_r must be positive and finite, got {lambda_r!r}")


def refit_closed_form(X: DesignMatrix, fit: LassoFit, lambda_r=None) -> RefitResult:
    """Ridge correction from the Lasso signs alone.

    Solves ``(Sigma_E + lambda_r I) delta_E = lambda_l * s`` by Cholesky
    factorization; no inverse is formed. ``lambda_r=None`` picks
    :func:`default_lambda_r`.
    """
    E = np.asarray(fit.active_set, dtype=np.intp)
    if lambda_r is None:
        lambda_r = default_lambda_r(X, E)
    _check_lambda_r(lambda_r)
    if E.size == 0:
        return _assemble(X, fit, np.zeros(0), lambda_r, "closed_form")
    S = restricted_gram(X, E)
    A = S + lambda_r * np.eye(E.size)
    try:
        factor = scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise RefitError(
            f"Cholesky failed for |E| = {E.size}, lambda_r = {lambda_r!r}, "
            f"min diagonal = {np.diag(A).min()!r}, max |entry| = {np.abs(A).max()!r}"
        ) from exc
    delta_E = scipy.linalg.cho_solve(factor, fit.lam * np.asarray(fit.signs, dtype=np.float64))
    return _assemble(X, fit, delta_E, lambda_r, "closed_form")


def refit_direct_solve(X: DesignMatrix, y, fit: LassoFit, lambda_r=None,
                       gtol=1e-10, max_iter=None) -> RefitResult:
    """Ridge correction by conjugate gradients on the penalized residual fit.

    Minimizes the quadratic over the coordinates in ``E`` using only
    matrix-vector products with ``X_E`` and the actual residual
    ``y - X beta_lasso``; the Lasso signs are not used. Stops when the
    gradient norm is at most ``gtol``.
    """
    E = np.asarray(fit.active_set, dtype=np.intp)
    if lambda_r is None:
        lambda_r = default_lambda_r(X, E)
    _check_lambda_r(lambda_r)
    if E.size == 0:
        return _assemble(X, fit, np.zeros(0), lambda_r, "direct_solve")

    n = X.n
    XE = X.values[:, E]
    r0 = np.asarray(y, dtype=np.float64) - X.values @ fit.beta
    b = XE.T @ r0 / n

    def hess(v):
        return XE.T @ (XE @ v) / n + lambda_r * v

    max_iter = max_iter or 50 * E.size + 1000
    d = np.zeros(E.size)
    g = -b
    dirn = -g
    gg = g @ g
    for it in range(max_iter):
        if np.sqrt(gg) <= gtol:
            break
        Hd = hess(dirn)
        step = gg / (dirn @ Hd)
        d = d + step * dirn
        if (it + 1) % 25 == 0:
            g = hess(d) - b
        else:
            g = g + step * Hd
        gg_new = g @ g
        dirn = -g + (gg_new / gg) * dirn
        gg = gg_new
    g = hess(d) - b
    gnorm = float(np.linalg.norm(g))
    if gnorm > gtol:
        raise RefitError(f"conjugate gradients stopped with gradient norm {gnorm!r} > {gtol!r}")
    return _assemble(X, fit, d, lambda_r, "direct_solve")


def empirical_risk_reduction_check(X: DesignMatrix, y, fit: LassoFit, refit: RefitResult):
    """Return ``(holds, gap)`` with ``gap = ||y - X beta_l|| - ||y - X beta_r||``.

    ``holds`` allows a slack of 1e-9.
    """
    y = np.asarray(y, dtype=np.float64)
    gap = float(np.linalg.norm(y - X.values @ fit.beta) - np.linalg.norm(y - X.values @ refit.beta_r))
    return gap >= -1e-9, gap


def ridge_objective_gap(X: DesignMatrix, y, fit: LassoFit, refit: RefitResult) -> float:
    """Optimality margin of the ridge step against ``delta = 0``.

    ``(1/2n)||y - X beta_l||^2 - (1/2n)||y - X beta_r||^2 - (lam_r/2)||delta||^2``,
    which is nonnegative at the minimizer.
    """
    y = np.asarray(y, dtype=np.float64)
    rl = y - X.values @ fit.beta
    rr = y - X.values @ refit.beta_r
    return float((rl @ rl - rr @ rr) / (2 * X.n) - 0.5 * refit.lambda_r * refit.delta @ refit.delta)


def improvement_certificate(X: DesignMatrix, model: TrueModel, eps, fit: LassoFit,
                            refit: RefitResult) -> ImprovementCertificate:
    model.check_design(X)
    eps = np.asarray(eps, dtype=np.float64)
    n = X.n
    Xb0 = X.values @ model.beta0
    el = X.values @ fit.beta - Xb0
    er = X.values @ refit.beta_r - Xb0
    lhs_gap = float((el @ el - er @ er) / (2 * n))
    noise_sup = float(np.abs(X.values.T @ eps).max() / n)
    lam_l, lam_r = fit.lam, refit.lambda_r
    remainder = float(lam_r / (2 * lam_l) * (lam_l - 3 * noise_sup) * (refit.delta @ refit.delta))
    return ImprovementCertificate(
        lhs_gap=lhs_gap,
        remainder=remainder,
        noise_sup=noise_sup,
        condition_met=bool(lam_l >= 3 * noise_sup),
        safe=refit.safe,
    )


def _sign(x):
    return np.where(np.abs(x) < SIGN_ZERO_TOL, 0.0, np.sign(x))


def sign_preservation_check(fit: LassoFit, refit: RefitResult) -> bool:
    """Check ``sign(delta_E) == s`` and ``sign(beta_r) == sign(beta_l)``.

    Magnitudes below 1e-12 count as zero. Coordinates in ``E`` whose Lasso
    coefficient is itself (numerically) zero sit on the equicorrelation
    boundary; they are covered by the ``delta`` check only.
    """
    E = np.asarray(fit.active_set, dtype=np.intp)
    if E.size == 0:
        return True
    if not np.array_equal(_sign(refit.delta[E]), np.asarray(fit.signs)):
        return False
    sl = _sign(fit.beta)
    sr = _sign(refit.beta_r)
    boundary = np.zeros(sl.shape, dtype=bool)
    boundary[E] = sl[E] == 0
    return bool(np.array_equal(sl[~boundary], sr[~boundary]))


def lemma_norm_gap(fit: LassoFit, refit: RefitResult) -> float:
    """``lam_r ||delta||_2^2 / 2 - lam_l ||delta||_1 / 3``; nonnegative for a safe refit."""
    d = refit.delta
    return float(refit.lambda_r * (d @ d) / 2 - fit.lam * np.abs(d).sum() / 3)
