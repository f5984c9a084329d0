"""Coordinate descent for SPAC-penalized and plain penalized least squares.

The SPAC loss penalizes ``gamma_j = beta_j / sqrt(d_jj)``::

    0.5 * ||y - sum_j X_j sqrt(d_j) gamma_j||^2 + sum_j d_j * P(gamma_j)

Each coordinate sub-problem has curvature ``n d_j``, so after dividing by it
the update is the unit-quadratic threshold map evaluated at ``z_j`` with an
effective threshold ``lam / n``. ``P`` is therefore ``n * p_{lam/n}``: for the
(adaptive) Lasso this is exactly ``lam |gamma|``; for SCAD the branch points
sit at ``lam / n`` and ``a lam / n`` on the coefficient scale.

Fits in "beta" space are the same computation with ``d = 1``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .errors import (AllZeroResponse, DimensionError, NoConvergedFit,
                     NoConvergence, NonFiniteIterate)
from .penalty import Family, PenaltySpec, adaptive_weights, alasso, lasso, penalty_value
from .precision import PrecisionDiag, sample_precision_diag

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 1000
# fixed-point (KKT) polish on top of the coordinate-change rule, in units of lam
KKT_TOL = 1e-5

_FAMILY_CODE = {Family.LASSO: _kernels.LASSO, Family.ALASSO: _kernels.ALASSO,
                Family.SCAD: _kernels.SCAD}


class Space(str, Enum):
    SPAC = "spac"
    BETA = "beta"


@dataclass(frozen=True, eq=False)
class SpacFit:
    gamma: np.ndarray
    beta: np.ndarray
    lam: float
    penalty: PenaltySpec
    iterations: int
    converged: bool
    objective: float
    space: Space
    d: np.ndarray
    rss: float = field(default=float("nan"))

    @property
    def support(self):
        return np.flatnonzero(self.gamma != 0)

    @property
    def df(self):
        return int(np.count_nonzero(self.gamma))


@dataclass(frozen=True, eq=False)
class PathFit:
    lambdas: np.ndarray
    fits: list
    bic: np.ndarray

    @property
    def converged(self):
        return np.array([f.converged for f in self.fits])

    @property
    def df(self):
        return np.array([f.df for f in self.fits])


def _d_array(d, p):
    arr = d.d if isinstance(d, PrecisionDiag) else np.asarray(d, dtype=float)
    if arr.shape != (p,):
        raise DimensionError(f"precision diagonal has shape {arr.shape}, expected ({p},)")
    return arr


def _weights(penalty, p):
    if penalty.family is Family.ALASSO:
        if penalty.weights.shape != (p,):
            raise DimensionError(f"{penalty.weights.shape[0]} weights for {p} coordinates")
        return np.asarray(penalty.weights, dtype=float)
    return np.ones(p)


def beta_from_gamma(gamma, d):
    gamma = np.asarray(gamma, dtype=float)
    return gamma * np.sqrt(_d_array(d, gamma.shape[0]))


def residual(data, d, gamma):
    return data.y - data.X @ beta_from_gamma(gamma, d)


def objective(data, d, penalty, gamma):
    """Penalized SPAC loss at ``gamma``; see the module docstring for scaling."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (data.p,):
        raise DimensionError(f"gamma has shape {gamma.shape}, expected ({data.p},)")
    dd = _d_array(d, data.p)
    r = residual(data, dd, gamma)
    n = data.n
    unit = penalty.with_lambda(penalty.lam / n)
    pen = sum(n * dd[j] * penalty_value(unit, gamma[j], j) for j in range(data.p))
    return 0.5 * float(r @ r) + pen


def partial_residual_z(data, r, gamma_prev_j, j, d):
    """Unpenalized coordinate solution ``X_j' r / (n sqrt(d_j)) + gamma_j``."""
    dd = _d_array(d, data.p)
    return float(data.X[:, j] @ r) / (data.n * math.sqrt(dd[j])) + gamma_prev_j


def _run_cd(data, dd, penalty, init, tol, max_iter):
    w = _weights(penalty, data.p)
    gamma, sweeps, status = _kernels.cd_fit(
        data.gram, data.xty, float(data.n), np.sqrt(dd), _FAMILY_CODE[penalty.family],
        float(penalty.lam), w, float(penalty.a), init, float(tol), int(max_iter), KKT_TOL)
    return gamma, sweeps, status


def coordinate_descent_fit(data, d, penalty, init=None, tol=DEFAULT_TOL,
                           max_iter=DEFAULT_MAX_ITER, space=Space.SPAC, strict=True):
    """Minimize the SPAC loss by cyclic coordinate descent.

    Sweeps run over coordinates in ascending order. A sweep counts as
    converged when ``max_j |dg_j| / max(|g_j|, 1) < tol`` and every
    coordinate is a fixed point of its threshold map to within
    ``KKT_TOL * lam`` on the gradient scale.

    With ``strict`` a fit that hits ``max_iter`` raises :class:`NoConvergence`
    carrying the partial fit; otherwise it is returned with
    ``converged=False``.
    """
    dd = _d_array(d, data.p)
    if np.any(dd <= 0) or not np.all(np.isfinite(dd)):
        raise ValueError("precision diagonal must be positive")
    init = np.zeros(data.p) if init is None else np.array(init, dtype=float)
    if init.shape != (data.p,) or not np.all(np.isfinite(init)):
        raise DimensionError("initial value must be a finite vector of length p")
    if penalty.family is Family.ALASSO:
        # pinned coordinates start (and stay) at zero
        init[np.isinf(_weights(penalty, data.p))] = 0.0

    gamma, sweeps, status = _run_cd(data, dd, penalty, init, tol, max_iter)
    if status == _kernels.NONFINITE:
        raise NonFiniteIterate(f"coordinate descent diverged at sweep {sweeps}")
    r = residual(data, dd, gamma)
    fit = SpacFit(gamma=gamma, beta=gamma * np.sqrt(dd), lam=float(penalty.lam),
                  penalty=penalty, iterations=int(sweeps),
                  converged=status == _kernels.OK,
                  objective=objective(data, dd, penalty, gamma), space=Space(space),
                  d=dd, rss=float(r @ r))
    if not np.isfinite(fit.objective):
        raise NonFiniteIterate("objective is not finite at the returned iterate")
    if strict and not fit.converged:
        raise NoConvergence(f"no convergence within {max_iter} sweeps", sweeps, fit)
    return fit


def kkt_violation(data, fit):
    """Largest violation of the (adaptive) Lasso subgradient conditions.

    For each j with gradient ``g_j = X_j' r sqrt(d_j)`` and bound
    ``b_j = lam * w_j * d_j``: active coordinates need ``g_j = b_j sign(gamma_j)``,
    inactive ones ``|g_j| <= b_j``. Returns ``max_j`` of the excess.
    """
    if fit.penalty.family is Family.SCAD:
        raise ValueError("SCAD is not convex; use fixed_point_violation")
    w = _weights(fit.penalty, data.p)
    r = data.y - data.X @ fit.beta
    g = (data.X.T @ r) * np.sqrt(fit.d)
    worst = 0.0
    for j in range(data.p):
        if np.isinf(w[j]):
            continue
        bound = fit.lam * w[j] * fit.d[j]
        if fit.gamma[j] != 0:
            worst = max(worst, abs(g[j] - bound * np.sign(fit.gamma[j])))
        else:
            worst = max(worst, abs(g[j]) - bound)
    return worst


def fixed_point_violation(data, fit):
    """``max_j n d_j |gamma_j - T_j(z_j)|`` for any penalty family."""
    return _kernels.fixed_point_residual(
        data.gram, data.xty, float(data.n), np.sqrt(fit.d),
        _FAMILY_CODE[fit.penalty.family], fit.lam, _weights(fit.penalty, data.p),
        float(fit.penalty.a), fit.gamma)


def lambda_max(data, d, penalty):
    """Smallest lambda at which the zero vector is a KKT point."""
    dd = _d_array(d, data.p)
    xty = np.abs(data.X.T @ data.y)
    if not np.any(xty > 0):
        raise AllZeroResponse("X'y is zero; every lambda gives the empty model")
    scores = xty / np.sqrt(dd)
    if penalty.family is Family.ALASSO:
        w = _weights(penalty, data.p)
        usable = np.isfinite(w) & (w > 0)
        if np.any(usable):
            scores = scores[usable] / w[usable]
        # all pinned: any lambda gives zero, keep the Lasso head
    # nudge so that the head of a path is exactly zero despite rounding
    return float(np.max(scores)) * (1 + 1e-12)


def lambda_grid(lmax, count=100, decades=3.0):
    if count < 2:
        raise ValueError("a lambda path needs at least 2 points")
    return lmax * np.logspace(0.0, -float(decades), int(count))


def bic(fit, n):
    rss = max(fit.rss, np.finfo(float).tiny)
    return n * math.log(rss / n) + fit.df * math.log(n)


def lambda_path(data, d, penalty, count=100, decades=3.0, tol=DEFAULT_TOL,
                max_iter=DEFAULT_MAX_ITER, space=Space.SPAC, lambdas=None):
    """Warm-started fits along a log-spaced descending lambda grid."""
    if lambdas is None:
        lambdas = lambda_grid(lambda_max(data, d, penalty), count, decades)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be strictly decreasing")
    fits, crit = [], []
    init = np.zeros(data.p)
    for lam in lambdas:
        fit = coordinate_descent_fit(data, d, penalty.with_lambda(lam), init=init,
                                     tol=tol, max_iter=max_iter, space=space,
                                     strict=False)
        if not fit.converged:
            log.debug("path entry lambda=%.4g did not converge", lam)
        fits.append(fit)
        crit.append(bic(fit, data.n))
        init = fit.gamma
    return PathFit(lambdas=lambdas, fits=fits, bic=np.array(crit))


def bic_select(path, data=None):
    """Converged fit with the smallest BIC; ties go to the larger lambda."""
    best = None
    for fit, score in zip(path.fits, path.bic):
        if not fit.converged:
            continue
        if best is None or score < best[1]:
            best = (fit, score)
    if best is None:
        raise NoConvergedFit("no path entry converged")
    return best[0]


def select(data, d, penalty, count=100, decades=3.0, tol=DEFAULT_TOL,
           max_iter=DEFAULT_MAX_ITER, space=Space.SPAC):
    """Convenience: BIC-tuned fit over the default path."""
    path = lambda_path(data, d, penalty, count=count, decades=decades, tol=tol,
                       max_iter=max_iter, space=space)
    return bic_select(path, data)


def baseline_fit(data, penalty, lam, init=None, tol=DEFAULT_TOL,
                 max_iter=DEFAULT_MAX_ITER, strict=True):
    """Plain penalized least squares on ``beta`` (unit precision diagonal)."""
    return coordinate_descent_fit(data, PrecisionDiag.ones(data.p),
                                  penalty.with_lambda(lam), init=init, tol=tol,
                                  max_iter=max_iter, space=Space.BETA, strict=strict)


def ols(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


class InitMode(str, Enum):
    LOW_DIM = "lowdim"
    HIGH_DIM = "highdim"


def alasso_initializer(data, d, mode=None, lasso_fit=None, **path_kw):
    """Initial SPAC estimate for the adaptive Lasso.

    ``lowdim``: OLS on all columns. ``highdim``: BIC-tuned SPAC-Lasso picks a
    support (``lasso_fit`` if already computed), OLS is refit on it, zeros
    elsewhere. Either way the result is divided by ``sqrt(d_j)``.
    """
    dd = _d_array(d, data.p)
    if mode is None:
        mode = InitMode.LOW_DIM if data.n > data.p else InitMode.HIGH_DIM
    mode = InitMode(mode)
    beta0 = np.zeros(data.p)
    if mode is InitMode.LOW_DIM:
        if data.n <= data.p:
            raise DimensionError("low-dimensional initializer needs n > p")
        sample_precision_diag(data)  # raises SingularDesign on a bad design
        beta0 = ols(data.X, data.y)
    else:
        fit = lasso_fit if lasso_fit is not None else select(data, dd, lasso(), **path_kw)
        support = fit.support
        if support.size:
            beta0[support] = ols(data.X[:, support], data.y)
    return beta0 / np.sqrt(dd)


def spac_alasso_penalty(data, d, mu=1.0, mode=None, lasso_fit=None, **path_kw):
    gamma0 = alasso_initializer(data, d, mode, lasso_fit=lasso_fit, **path_kw)
    return alasso(adaptive_weights(gamma0, mu), mu=mu)


def baseline_alasso_penalty(data, mu=1.0, initial=None, **path_kw):
    """Adaptive weights from a BIC-tuned plain Lasso unless ``initial`` is given."""
    if initial is None:
        initial = select(data, PrecisionDiag.ones(data.p), lasso(),
                         space=Space.BETA, **path_kw).beta
    return alasso(adaptive_weights(initial, mu), mu=mu)
