"""Estimators for the diagonal of the precision matrix ``D = C^{-1}``.

Low-dimensional data (n > p) use the sample precision matrix; otherwise the
diagonal is estimated from square-root-Lasso node-wise residual variances.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import (DegenerateResidual, DimensionError, NoConvergence,
                     NonFiniteIterate, SingularDesign)

log = logging.getLogger(__name__)

CONDITION_CAP = 1e12


class PrecisionMethod(str, Enum):
    SAMPLE = "sample"
    OLS = "ols"
    SQRT_LASSO = "sqrtlasso"


@dataclass(frozen=True, eq=False)
class PrecisionDiag:
    d: np.ndarray
    method: PrecisionMethod
    lambda_d: float | None = None

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 1 or not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("precision diagonal must be positive and finite")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "method", PrecisionMethod(self.method))

    @property
    def p(self):
        return self.d.shape[0]

    @classmethod
    def ones(cls, p):
        """Unit diagonal; turns every SPAC fit into its plain counterpart."""
        return cls(np.ones(p), PrecisionMethod.SAMPLE)


def _require_low_dim(data):
    if data.n <= data.p:
        raise DimensionError(
            f"sample precision needs n > p, got n={data.n}, p={data.p}")


def sample_precision_diag(data, condition_cap=CONDITION_CAP):
    """Diagonal of ``(X'X / n)^{-1}``."""
    _require_low_dim(data)
    gram = data.X.T @ data.X / data.n
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= 0 or eig[-1] / eig[0] > condition_cap:
        raise SingularDesign(
            f"X'X/n is singular or ill-conditioned (eigenvalues {eig[0]:.3e}..{eig[-1]:.3e})")
    try:
        inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularDesign(str(exc)) from None
    return PrecisionDiag(np.diag(inv).copy(), PrecisionMethod.SAMPLE)


def nodewise_residual_ss(data):
    """``e_j' e_j`` for the regression of each column on all the others."""
    X, p = data.X, data.p
    out = np.empty(p)
    for j in range(p):
        others = np.delete(X, j, axis=1)
        if p == 1:
            e = X[:, j]
        else:
            coef, _, rank, _ = np.linalg.lstsq(others, X[:, j], rcond=None)
            if rank < p - 1:
                raise SingularDesign(f"columns other than {j} are rank deficient")
            e = X[:, j] - others @ coef
        out[j] = e @ e
    if np.any(out <= 1e-12 * data.n):
        raise SingularDesign("a column is (nearly) a linear combination of the others")
    return out


def ols_residual_precision_diag(data):
    """``(n - p + 1) / (e_j' e_j)`` from node-wise OLS residuals."""
    _require_low_dim(data)
    ss = nodewise_residual_ss(data)
    return PrecisionDiag((data.n - data.p + 1) / ss, PrecisionMethod.OLS)


def default_lambda_d(n, p):
    return float(np.sqrt(2.0 * np.log(p) / n))


def sqrt_lasso_column(data, j, lambda_d, max_sweeps=20000, tol=1e-8):
    """Node-wise square-root Lasso coefficients ``B_j`` with ``B_j[j] = 1``.

    Solves ``min ||X B_j||_2 / sqrt(n) + lambda_d * ||B_j||_1``. At the
    solution ``|X_k' X B_j| / (sqrt(n) ||X B_j||) <= lambda_d`` for k != j.
    """
    if not lambda_d > 0:
        raise ValueError(f"lambda_d must be positive, got {lambda_d}")
    S = np.asfortranarray(data.gram / data.n)
    b, sigma, iters, status = _kernels.sqrt_lasso_column(
        S, int(j), float(lambda_d), int(max_sweeps), float(tol), 1e-10)
    if status == _kernels.MAX_ITER:
        raise NoConvergence(f"square-root Lasso for column {j} did not converge "
                            f"in {max_sweeps} sweeps", iters, b)
    if status == _kernels.NONFINITE:
        raise NonFiniteIterate(f"square-root Lasso for column {j} diverged")
    if status == _kernels.DEGENERATE:
        raise DegenerateResidual(j, sigma ** 2)
    return b


def sqrt_lasso_precision_diag(data, lambda_d=None):
    """``1 / ((1/n) ||(I - 11'/n) X B_j||^2)`` with ``B_j`` from the square-root Lasso."""
    if lambda_d is None:
        lambda_d = default_lambda_d(data.n, max(data.p, 2))
    d = np.empty(data.p)
    for j in range(data.p):
        b = sqrt_lasso_column(data, j, lambda_d)
        u = data.X @ b
        u = u - u.mean()
        var = u @ u / data.n
        if not var >= 1e-12:
            raise DegenerateResidual(j, var)
        d[j] = 1.0 / var
    return PrecisionDiag(d, PrecisionMethod.SQRT_LASSO, float(lambda_d))


def estimate_precision_diag(data, method="auto", lambda_d=None):
    """Pick the estimator by regime (``auto``) or by name."""
    if method == "auto":
        method = PrecisionMethod.SAMPLE if data.n > data.p else PrecisionMethod.SQRT_LASSO
    method = PrecisionMethod(method)
    if method is PrecisionMethod.SAMPLE:
        return sample_precision_diag(data)
    if method is PrecisionMethod.OLS:
        return ols_residual_precision_diag(data)
    return sqrt_lasso_precision_diag(data, lambda_d)
