"""Compiled inner loops for coordinate descent.

Both solvers work in covariance form: they keep the correlation vector
``X' r`` up to date through the Gram matrix ``G = X' X`` instead of the
n-vector residual, so a coordinate that does not move costs O(1).
Columns are assumed to satisfy ``X_j' X_j = n``.
"""
import numpy as np
from numba import njit

LASSO, ALASSO, SCAD = 0, 1, 2

# status codes
OK, MAX_ITER, NONFINITE, DEGENERATE = 0, 1, 2, 3


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _threshold(fam, z, t, w, a):
    # t is the effective threshold lam / n
    if fam == LASSO:
        return _soft(z, t)
    if fam == ALASSO:
        if np.isinf(w):
            return 0.0
        return _soft(z, t * w)
    az = abs(z)
    if az <= 2.0 * t:
        return _soft(z, t)
    if az <= a * t:
        s = 1.0 if z > 0 else -1.0
        return ((a - 1.0) * z - s * a * t) / (a - 2.0)
    return z


@njit(cache=True)
def _correlation(G, xty, sqrt_d, gamma):
    # X' r for r = y - X (sqrt_d * gamma)
    p = G.shape[0]
    g = xty.copy()
    for k in range(p):
        c = sqrt_d[k] * gamma[k]
        if c != 0.0:
            for i in range(p):
                g[i] -= G[i, k] * c
    return g


@njit(cache=True)
def fixed_point_residual(G, xty, n, sqrt_d, fam, lam, w, a, gamma):
    """max_j n d_j |gamma_j - T_j(z_j)|, the gradient-scale KKT violation."""
    p = G.shape[0]
    t = lam / n
    g = _correlation(G, xty, sqrt_d, gamma)
    worst = 0.0
    for j in range(p):
        z = g[j] / (n * sqrt_d[j]) + gamma[j]
        e = abs(gamma[j] - _threshold(fam, z, t, w[j], a))
        v = n * sqrt_d[j] * sqrt_d[j] * e
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def cd_fit(G, xty, n, sqrt_d, fam, lam, w, a, gamma0, tol, max_iter, kkt_tol):
    """Cyclic coordinate descent on the d-reweighted penalized least squares.

    ``G = X'X`` (F-order), ``xty = X'y``. Returns ``(gamma, sweeps, status)``.
    """
    p = G.shape[0]
    t = lam / n
    gamma = gamma0.copy()
    g = _correlation(G, xty, sqrt_d, gamma)
    kkt_scale = kkt_tol * lam if lam > 0.0 else kkt_tol
    for it in range(1, max_iter + 1):
        maxrel = 0.0
        for j in range(p):
            old = gamma[j]
            z = g[j] / (n * sqrt_d[j]) + old
            new = _threshold(fam, z, t, w[j], a)
            if new != old:
                c = sqrt_d[j] * (new - old)
                for i in range(p):
                    g[i] -= G[i, j] * c
                gamma[j] = new
                rel = abs(new - old) / max(abs(old), 1.0)
                if rel > maxrel:
                    maxrel = rel
        if not np.isfinite(maxrel):
            return gamma, it, NONFINITE
        for j in range(p):
            if not np.isfinite(gamma[j]):
                return gamma, it, NONFINITE
        if maxrel < tol:
            # the change rule alone can stop short of the KKT point
            if fixed_point_residual(G, xty, n, sqrt_d, fam, lam, w, a, gamma) <= kkt_scale:
                return gamma, it, OK
            g = _correlation(G, xty, sqrt_d, gamma)
    return gamma, max_iter, MAX_ITER


@njit(cache=True)
def sqrt_lasso_column(S, j, lam_d, max_sweeps, sigma_tol, coef_tol):
    """Square-root Lasso for column ``j`` with ``b_j`` fixed at 1.

    ``S = X'X / n``. Minimizes ``||X b|| / sqrt(n) + lam_d * sum_{k != j} |b_k|``
    through the jointly convex scaled-Lasso form
    ``b'Sb / (2 sigma) + sigma / 2 + lam_d ||b||_1``: each sweep updates every
    free coordinate at penalty ``sigma * lam_d`` and then sets
    ``sigma = sqrt(b'Sb)``. Returns ``(b, sigma, sweeps, status)``.
    """
    p = S.shape[0]
    b = np.zeros(p)
    b[j] = 1.0
    h = S[:, j].copy()  # S b
    sigma = np.sqrt(S[j, j])
    if sigma <= 1e-150:
        return b, sigma, 0, DEGENERATE
    for it in range(1, max_sweeps + 1):
        thr = sigma * lam_d
        maxchg = 0.0
        for k in range(p):
            if k == j:
                continue
            old = b[k]
            new = _soft(old - h[k] / S[k, k], thr / S[k, k])
            if new != old:
                d = new - old
                for i in range(p):
                    h[i] += S[i, k] * d
                b[k] = new
                if abs(d) > maxchg:
                    maxchg = abs(d)
        ss = 0.0
        for k in range(p):
            ss += b[k] * h[k]
        new_sigma = np.sqrt(max(ss, 0.0))
        if not np.isfinite(new_sigma):
            return b, new_sigma, it, NONFINITE
        if new_sigma <= 1e-150:
            return b, new_sigma, it, DEGENERATE
        change = abs(new_sigma - sigma) / sigma
        sigma = new_sigma
        if change < sigma_tol and maxchg < coef_tol:
            # recompute instead of trusting the running update
            h = S @ b
            ss = 0.0
            for k in range(p):
                ss += b[k] * h[k]
            return b, np.sqrt(max(ss, 0.0)), it, OK
    return b, sigma, max_sweeps, MAX_ITER
