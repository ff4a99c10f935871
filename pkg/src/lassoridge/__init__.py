"""Lasso-Ridge refitting for sparse high-dimensional linear regression."""

from .core import (
    DesignMatrix,
    Rng,
    TrueModel,
    gaussian_vector,
    infinity_operator_norm,
    normalize_columns,
    restricted_gram,
    spectral_norm,
)
from .lasso import LassoFit, LassoSettings, equicorrelation, fit_lasso, lasso_path, soft_threshold
from .refit import (
    ImprovementCertificate,
    RefitResult,
    empirical_risk_reduction_check,
    improvement_certificate,
    min_safe_lambda_r,
    refit_closed_form,
    refit_direct_solve,
    sign_preservation_check,
)
from .tuning import CvResult, Grid, cross_validate, lambda_l_grid, lambda_r_grid, theoretical_lambda_l

__version__ = "0.1.0"

__all__ = [
    "CvResult", "DesignMatrix", "Grid", "ImprovementCertificate", "LassoFit", "LassoSettings",
    "RefitResult", "Rng", "TrueModel", "cross_validate", "empirical_risk_reduction_check",
    "equicorrelation", "fit_lasso", "gaussian_vector", "improvement_certificate",
    "infinity_operator_norm", "lambda_l_grid", "lambda_r_grid", "lasso_path", "min_safe_lambda_r",
    "normalize_columns", "refit_closed_form", "refit_direct_solve", "restricted_gram",
    "sign_preservation_check", "soft_threshold", "spectral_norm", "theoretical_lambda_l",
]
