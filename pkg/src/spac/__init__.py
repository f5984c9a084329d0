"""Penalized regression on the semi-standard partial covariance (SPAC).

Instead of penalizing ``beta_j`` directly, the estimators here penalize
``gamma_j = beta_j / sqrt(d_jj)`` where ``d_jj`` is the j-th diagonal entry of
the precision matrix, which lets relevant covariates survive strong
correlation with irrelevant ones.
"""
__version__ = "0.1.0"

from .data import Dataset, load_csv, standardize
from .errors import SpacError
from .penalty import Family, PenaltySpec, alasso, lasso, scad
from .precision import PrecisionDiag, PrecisionMethod, estimate_precision_diag
from .solver import (PathFit, SpacFit, bic_select, coordinate_descent_fit,
                     lambda_path, select)

__all__ = [
    "Dataset", "load_csv", "standardize", "SpacError", "Family", "PenaltySpec",
    "alasso", "lasso", "scad", "PrecisionDiag", "PrecisionMethod",
    "estimate_precision_diag", "PathFit", "SpacFit", "bic_select",
    "coordinate_descent_fit", "lambda_path", "select", "__version__",
]
