"""Structured covariance matrices and irrepresentable-condition audits.

The first ``q`` coordinates are the relevant ones throughout. ``C_11`` is the
leading ``q x q`` block, ``C_21`` the ``(p - q) x q`` block below it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateDenominator, DimensionError, NegativeEntry,
                     NotPositiveDefinite)

PD_TOL = 1e-10
WEAK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """A validated correlation matrix plus a record of how it was built.

    ``kind`` is ``"exchangeable"``, ``"ar1"``, ``"random"`` or ``"explicit"``;
    ``params`` holds the constructor arguments.
    """

    kind: str
    realized: np.ndarray
    params: dict

    def __post_init__(self):
        C = np.array(self.realized, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise DimensionError(f"covariance must be square, got {C.shape}")
        if not np.allclose(C, C.T, atol=1e-10, rtol=0):
            raise ValueError("covariance matrix is not symmetric")
        if not np.allclose(np.diag(C), 1.0, atol=1e-10, rtol=0):
            raise ValueError("covariance matrix must have unit diagonal")
        C = (C + C.T) / 2
        lo = np.linalg.eigvalsh(C)[0]
        if lo <= PD_TOL:
            raise NotPositiveDefinite(lo)
        C.setflags(write=False)
        object.__setattr__(self, "realized", C)

    @property
    def p(self):
        return self.realized.shape[0]


def _check_qp(q, p):
    if not (1 <= q < p):
        raise DimensionError(f"need 1 <= q < p, got q={q}, p={p}")


def block_exchangeable_cov(q, p, alpha):
    a1, a2, a3 = map(float, alpha)
    _check_qp(q, p)
    C = np.full((p, p), a2)
    C[:q, :q] = a1
    C[q:, q:] = a3
    np.fill_diagonal(C, 1.0)
    return CovarianceModel("exchangeable", C, {"q": q, "p": p, "alpha": (a1, a2, a3)})


def block_ar1_cov(q, p, alpha):
    a1, a2, a3 = map(float, alpha)
    _check_qp(q, p)
    idx = np.arange(p)
    lag = np.abs(idx[:, None] - idx[None, :]).astype(float)
    # 0 ** 0 = 1 keeps the unit diagonal for alpha = 0
    C = np.power(a2, lag)
    C[:q, :q] = np.power(a1, lag[:q, :q])
    C[q:, q:] = np.power(a3, lag[q:, q:])
    return CovarianceModel("ar1", C, {"q": q, "p": p, "alpha": (a1, a2, a3)})


def explicit_cov(C):
    return CovarianceModel("explicit", C, {})


def _as_matrix(C):
    return C.realized if isinstance(C, CovarianceModel) else np.asarray(C, dtype=float)


def _checked_matrix(C):
    """Return a validated ndarray, whatever form ``C`` came in."""
    if isinstance(C, CovarianceModel):
        return C.realized
    M = np.asarray(C, dtype=float)
    lo = np.linalg.eigvalsh((M + M.T) / 2)[0]
    if lo <= PD_TOL:
        raise NotPositiveDefinite(lo)
    return M


def precision_diagonal(C):
    """``d_jj = (C^{-1})_jj``."""
    return np.diag(np.linalg.inv(_checked_matrix(C))).copy()


def conditional_variance(C, j):
    """``Var(X_j | X_{-j})`` via the Schur complement."""
    M = _checked_matrix(C)
    rest = np.delete(np.arange(M.shape[0]), j)
    c = M[rest, j]
    return float(M[j, j] - c @ np.linalg.solve(M[np.ix_(rest, rest)], c))


@dataclass(frozen=True)
class ConditionReport:
    original_vector: np.ndarray
    transformed_vector: np.ndarray
    original_weak: bool
    original_strong_margin: float
    transformed_weak: bool
    transformed_strong_margin: float

    def to_dict(self):
        return {
            "original_vector": self.original_vector.tolist(),
            "transformed_vector": self.transformed_vector.tolist(),
            "original_weak": self.original_weak,
            "original_strong_margin": self.original_strong_margin,
            "original_max": float(self.original_vector.max()),
            "transformed_weak": self.transformed_weak,
            "transformed_strong_margin": self.transformed_strong_margin,
            "transformed_max": float(self.transformed_vector.max()),
        }


def check_irrepresentable(C, q, signs=None):
    """Audit the original and the transformed irrepresentable conditions.

    ``original_vector = |C_21 C_11^{-1} s|`` and
    ``transformed_vector = |V2 C_21 C_11^{-1} V1^{-1} s|`` where ``V`` is
    ``diag(sqrt(1 / d_jj))``. Margins are ``1 - max(entry)``.
    """
    M = _checked_matrix(C)
    p = M.shape[0]
    _check_qp(q, p)
    s = np.ones(q) if signs is None else np.asarray(signs, dtype=float)
    if s.shape != (q,):
        raise DimensionError(f"need {q} signs, got {s.shape}")
    d = precision_diagonal(M)
    v = np.sqrt(1.0 / d)
    A = M[q:, :q] @ np.linalg.inv(M[:q, :q])
    orig = np.abs(A @ s)
    trans = np.abs(v[q:] * (A @ (s / v[:q])))
    return ConditionReport(
        original_vector=orig,
        transformed_vector=trans,
        original_weak=bool(np.all(orig <= 1 + WEAK_TOL)),
        original_strong_margin=float(1 - orig.max()),
        transformed_weak=bool(np.all(trans <= 1 + WEAK_TOL)),
        transformed_strong_margin=float(1 - trans.max()),
    )


def exchangeable_closed_form(q, alpha, signs):
    """``|alpha2 * m| / (1 - alpha1 + alpha1 * q)`` with ``m = sum(signs)``."""
    a1, a2, _ = alpha
    m = float(np.sum(signs))
    return abs(a2 * m) / (1 - a1 + a1 * q)


def exchangeable_sufficient_check(alpha, L_lower, eta):
    """True iff ``|a2| <= (1 - eta) sqrt((1 - a1) / (1 - a3)) a1 L``."""
    a1, a2, a3 = alpha
    bound = (1 - eta) * np.sqrt((1 - a1) / (1 - a3)) * a1 * L_lower
    return bool(abs(a2) <= bound)


def ar1_lhs(alpha):
    a1, a2, a3 = alpha
    if a2 == a3:
        raise DegenerateDenominator("alpha2 == alpha3 makes alpha2/|alpha2 - alpha3| unbounded")
    lead = max(a2 / abs(a2 - a3), 1.0)
    return (lead * np.sqrt((1 - a3 ** 2) / (1 - a1 ** 2))
            * a2 * (1 - a1 * a2) / ((1 + a1) * (1 - a2)))


def ar1_sufficient_check(alpha, eta):
    return bool(ar1_lhs(alpha) <= 1 - eta)


def _largest_angle(v, cols):
    nv = np.linalg.norm(v)
    if nv == 0:
        return 0.0
    norms = np.linalg.norm(cols, axis=0)
    keep = norms > 0
    if not np.any(keep):
        return 0.0
    cos = (v @ cols[:, keep]) / (nv * norms[keep])
    return float(np.max(np.arccos(np.clip(cos, -1.0, 1.0))))


def general_sufficient_terms(C, q):
    """Per-index pieces of the nonnegative-covariance sufficient condition.

    Returns ``(num, den, g_norm)`` where ``num[j] = 1 - |v_j|^2 / lmax_j``,
    ``den[i] = 1 - |v_i|^2 / lmax_i - |v_i|^2 sin^2(phi_i) / lmin_i`` and
    ``g_norm = ||C_21 C_11^{-1}||_inf`` (max absolute row sum).
    """
    M = _checked_matrix(C)
    p = M.shape[0]
    _check_qp(q, p)
    if np.any(M < 0):
        raise NegativeEntry("the sufficient condition assumes nonnegative covariances")
    num = np.empty(p)
    den = np.empty(p)
    for i in range(p):
        rest = np.delete(np.arange(p), i)
        Ci = M[np.ix_(rest, rest)]
        vi = M[rest, i]
        eig = np.linalg.eigvalsh(Ci)
        lmin, lmax = eig[0], eig[-1]
        vv = float(vi @ vi)
        phi = _largest_angle(vi, Ci)
        num[i] = 1 - vv / lmax
        den[i] = 1 - vv / lmax - vv * np.sin(phi) ** 2 / lmin
    A = M[q:, :q] @ np.linalg.inv(M[:q, :q])
    return num, den, float(np.max(np.sum(np.abs(A), axis=1)))


def general_sufficient_check(C, q, eta):
    num, den, g_norm = general_sufficient_terms(C, q)
    if g_norm == 0:
        return True
    g2 = ((1 - eta) / g_norm) ** 2
    for i in range(q):
        if den[i] <= 0:
            return False
        for j in range(q, len(num)):
            ratio = num[j] / den[i]
            if not (0 <= ratio < g2):
                return False
    return True


def random_c1_covariance(p, q, shift_range=(1.0, 2.0), seed=0):
    """Random correlation matrix with strong relevant/irrelevant correlation.

    ``A ~ U(0,1)^{p x p}``, ``A1 ~ U(low, high)^{(p-q) x p}``; the rows of
    ``A`` below the first ``q`` get ``A1`` added, then ``G = A2 A2' + I`` is
    rescaled to unit diagonal.
    """
    low, high = shift_range
    if not low < high:
        raise ValueError(f"need low < high, got {shift_range}")
    _check_qp(q, p)
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.0, 1.0, size=(p, p))
    A1 = rng.uniform(low, high, size=(p - q, p))
    A2 = A.copy()
    A2[q:] += A1
    G = A2 @ A2.T + np.eye(p)
    s = np.sqrt(np.diag(G))
    C = G / np.outer(s, s)
    np.fill_diagonal(C, 1.0)
    return CovarianceModel("random", C, {"q": q, "p": p, "shift_range": (low, high),
                                         "seed": seed})
