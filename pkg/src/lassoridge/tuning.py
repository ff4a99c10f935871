"""Penalty grids, the theoretical Lasso rate, and K-fold cross-validation.

Grids follow the usual benchmark layout: 20 log-spaced Lasso penalties from
``||X^T y||_inf / n`` down to 1e-3 of that, and 10 log-spaced ridge
penalties from ``n`` down to ``1e-3 n``. The Lasso-Ridge search evaluates
the full 20 x 10 product, each cell being a Lasso fit followed by a ridge
refit on its equicorrelation set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import DesignMatrix, Rng, normalize_with_scale
from .lasso import LassoFit, fit_lasso, lasso_path
from .refit import RefitResult, refit_closed_form

LASSO_ONLY = "lasso"
LASSO_RIDGE = "lasso_ridge"


@dataclass(frozen=True)
class Grid:
    lambda_l_values: np.ndarray
    lambda_r_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("lambda_l_values", "lambda_r_values"):
            v = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if np.any(v <= 0) or np.any(np.diff(v) >= 0):
                raise ValueError(f"{name} must be positive and strictly decreasing")
            object.__setattr__(self, name, v)
        if self.lambda_l_values.size == 0:
            raise ValueError("lambda_l_values is empty")


@dataclass
class CvResult:
    """Outcome of a cross-validated search.

    ``cv_error_surface`` has shape ``(L,)`` for the Lasso and ``(L, R)`` for
    Lasso-Ridge, indexed like the grid. ``fit`` (and ``refit`` for
    Lasso-Ridge) are the final models on the full data at the selected
    penalties.
    """

    estimator: str
    best_lambda_l: float
    best_lambda_r: Optional[float]
    best_index: tuple
    cv_error_surface: np.ndarray
    fold_assignment: np.ndarray
    nonconverged: np.ndarray
    fit: Optional[LassoFit] = None
    refit: Optional[RefitResult] = None

    @property
    def beta(self):
        if self.refit is not None:
            return self.refit.beta_r
        return self.fit.beta


def lambda_l_grid(X: DesignMatrix, y, count=20) -> np.ndarray:
    """``count`` log-spaced values from ``||X^T y||_inf / n`` down to 1e-3 of it."""
    if count < 2:
        raise ValueError("count must be at least 2")
    top = float(np.abs(X.values.T @ np.asarray(y, dtype=np.float64)).max() / X.n)
    if top == 0:
        raise ValueError("||X^T y||_inf is zero; y is orthogonal to every column")
    return top * np.logspace(0.0, -3.0, count)


def lambda_r_grid(n, count=10) -> np.ndarray:
    """``count`` log-spaced values from ``n`` down to ``1e-3 n``."""
    if count < 2:
        raise ValueError("count must be at least 2")
    return float(n) * np.logspace(0.0, -3.0, count)


def make_grid(X: DesignMatrix, y, n_lambda_l=20, n_lambda_r=10) -> Grid:
    return Grid(lambda_l_grid(X, y, n_lambda_l), lambda_r_grid(X.n, n_lambda_r))


def theoretical_lambda_l(sigma, n, p, alpha) -> float:
    """``3 sigma sqrt(2 log(2p / alpha) / n)``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return 3.0 * sigma * math.sqrt(2.0 * math.log(2.0 * p / alpha) / n)


def tie_break(indices: Sequence):
    """Most-regularized minimizer: largest Lasso penalty, then largest ridge penalty.

    Grids are descending, so this is the lexicographically smallest index.
    """
    indices = list(indices)
    if not indices:
        raise ValueError("no indices to choose from")
    return min(indices)


def fold_assignment(n, folds, rng: Rng) -> np.ndarray:
    """Shuffled partition of ``range(n)`` into ``folds`` groups of near-equal size."""
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if n < folds:
        raise ValueError(f"need at least {folds} rows for {folds}-fold CV, got {n}")
    perm = rng.generator.permutation(n)
    out = np.empty(n, dtype=np.int64)
    out[perm] = np.arange(n) % folds
    return out


def _select(surface):
    best = np.nanmin(surface)
    hits = [tuple(int(k) for k in ix) for ix in np.argwhere(surface == best)]
    return tie_break(hits)


def _fold_errors(X: DesignMatrix, y, grid: Grid, assignment, settings, with_ridge):
    L = grid.lambda_l_values.size
    R = grid.lambda_r_values.size
    folds = int(assignment.max()) + 1
    lasso_err = np.zeros(L)
    ridge_err = np.zeros((L, R))
    nonconv = np.zeros(L, dtype=bool)
    for k in range(folds):
        val = assignment == k
        if not val.any():
            raise ValueError(f"fold {k} has no validation rows")
        Xtr, scale = normalize_with_scale(X.values[~val])
        ytr, Xval, yval = y[~val], X.values[val], y[val]
        for i, fit in enumerate(lasso_path(Xtr, ytr, grid.lambda_l_values, settings)):
            nonconv[i] |= not fit.converged
            res = yval - Xval @ (fit.beta * scale)
            lasso_err[i] += res @ res / res.size
            if not with_ridge:
                continue
            for j, lam_r in enumerate(grid.lambda_r_values):
                rf = refit_closed_form(Xtr, fit, lam_r)
                res = yval - Xval @ (rf.beta_r * scale)
                ridge_err[i, j] += res @ res / res.size
    return lasso_err / folds, ridge_err / folds, nonconv


def _result(estimator, X, y, grid, surface, assignment, nonconv, settings):
    best = _select(surface)
    lam_l = float(grid.lambda_l_values[best[0]])
    fit = fit_lasso(X, y, lam_l, settings)
    if estimator == LASSO_ONLY:
        return CvResult(estimator, lam_l, None, best, surface, assignment, nonconv, fit)
    lam_r = float(grid.lambda_r_values[best[1]])
    refit = refit_closed_form(X, fit, lam_r)
    return CvResult(estimator, lam_l, lam_r, best, surface, assignment, nonconv, fit, refit)


def cross_validate_pair(X: DesignMatrix, y, grid: Grid, folds=5, rng: Rng | None = None,
                        settings=None, assignment=None):
    """Cross-validate the Lasso and Lasso-Ridge on the same folds.

    The Lasso paths are computed once per fold and shared by both searches.
    Returns ``(lasso_result, lasso_ridge_result)``.
    """
    y = np.asarray(y, dtype=np.float64)
    if assignment is None:
        assignment = fold_assignment(X.n, folds, rng or Rng(0))
    lasso_err, ridge_err, nonconv = _fold_errors(X, y, grid, assignment, settings, True)
    return (
        _result(LASSO_ONLY, X, y, grid, lasso_err, assignment, nonconv, settings),
        _result(LASSO_RIDGE, X, y, grid, ridge_err, assignment, nonconv, settings),
    )


def cross_validate(X: DesignMatrix, y, grid: Grid, folds=5, rng: Rng | None = None,
                   estimator=LASSO_ONLY, settings=None, assignment=None) -> CvResult:
    """K-fold cross-validation over ``grid`` by mean held-out squared error.

    Each training split is re-normalized on its own column norms; the fitted
    coefficients are mapped back to the original columns before scoring the
    validation rows. Ties go to the most-regularized cell. The selected
    model is refit on the full data.
    """
    if estimator not in (LASSO_ONLY, LASSO_RIDGE):
        raise ValueError(f"unknown estimator {estimator!r}")
    if estimator == LASSO_RIDGE and grid.lambda_r_values.size == 0:
        raise ValueError("Lasso-Ridge search needs lambda_r values")
    y = np.asarray(y, dtype=np.float64)
    if assignment is None:
        assignment = fold_assignment(X.n, folds, rng or Rng(0))
    with_ridge = estimator == LASSO_RIDGE
    lasso_err, ridge_err, nonconv = _fold_errors(X, y, grid, assignment, settings, with_ridge)
    surface = ridge_err if with_ridge else lasso_err
    return _result(estimator, X, y, grid, surface, assignment, nonconv, settings)
