import math

import numpy as np
import pytest

from spac.conditions import block_exchangeable_cov
from spac.data import standardize
from spac.errors import DegenerateResidual, DimensionError, SingularDesign
from spac.precision import (PrecisionDiag, PrecisionMethod, default_lambda_d,
                            estimate_precision_diag, nodewise_residual_ss,
                            ols_residual_precision_diag, sample_precision_diag,
                            sqrt_lasso_column, sqrt_lasso_precision_diag)

from conftest import make_data, orthogonal_design


def sqrt_lasso_objective(data, b, j, lam):
    u = data.X @ b
    return np.linalg.norm(u) / math.sqrt(data.n) + lam * (np.abs(b).sum() - abs(b[j]))


def test_identity_gram_gives_unit_diagonal():
    X = orthogonal_design(50, 4, 0)
    d = sample_precision_diag(standardize(X, np.zeros(50))).d
    np.testing.assert_allclose(d, 1.0, atol=1e-12)


def test_two_column_closed_form():
    data = make_data(40, 2, 3, rho=0.6)
    r = data.X[:, 0] @ data.X[:, 1] / data.n
    np.testing.assert_allclose(sample_precision_diag(data).d, [1 / (1 - r * r)] * 2, rtol=1e-12)


def test_sample_matches_direct_inverse():
    data = make_data(100, 10, 5, rho=0.3)
    oracle = np.diag(np.linalg.inv(data.X.T @ data.X / data.n))
    np.testing.assert_allclose(sample_precision_diag(data).d, oracle, rtol=1e-8)


def test_sample_requires_low_dimension():
    with pytest.raises(DimensionError):
        sample_precision_diag(make_data(10, 10, 0))


def test_sample_rejects_collinear_design():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 3))
    X = np.column_stack([X, X[:, 0] + X[:, 1]])
    with pytest.raises(SingularDesign):
        sample_precision_diag(standardize(X, rng.standard_normal(30)))


def test_ols_orthogonal_design():
    X = orthogonal_design(101, 2, 1)
    data = standardize(X, np.zeros(101))
    np.testing.assert_allclose(nodewise_residual_ss(data), [101.0, 101.0], rtol=1e-10)
    np.testing.assert_allclose(ols_residual_precision_diag(data).d, [100 / 101] * 2, rtol=1e-10)


def test_ols_single_column():
    data = make_data(20, 1, 2)
    np.testing.assert_allclose(ols_residual_precision_diag(data).d, [1.0], rtol=1e-12)


def test_sample_and_ols_identity():
    for seed in range(10):
        data = make_data(100, 10, seed, rho=0.4)
        ss = nodewise_residual_ss(data)
        np.testing.assert_allclose(sample_precision_diag(data).d, data.n / ss, rtol=1e-8)
        ratio = sample_precision_diag(data).d / ols_residual_precision_diag(data).d
        np.testing.assert_allclose(ratio, data.n / (data.n - data.p + 1), rtol=1e-8)


def test_sample_precision_consistency():
    C = block_exchangeable_cov(2, 5, (0.3, 0.5, 0.8)).realized
    true_d = np.diag(np.linalg.inv(C))
    rng = np.random.default_rng(11)
    Z = rng.standard_normal((10000, 5)) @ np.linalg.cholesky(C).T
    d = sample_precision_diag(standardize(Z, np.zeros(10000))).d
    assert np.max(np.abs(d - true_d)) < 0.1


def test_default_lambda_d():
    assert math.isclose(default_lambda_d(100, 200), 0.32552472614374584, rel_tol=1e-12)
    assert math.isclose(default_lambda_d(2, math.e), 1.0, rel_tol=1e-12)
    vals = [default_lambda_d(n, 50) for n in (10, 100, 1000, 10000)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_sqrt_lasso_orthogonal_columns():
    data = standardize(orthogonal_design(60, 5, 2), np.zeros(60))
    for j in range(5):
        b = sqrt_lasso_column(data, j, 0.05)
        np.testing.assert_array_equal(b, np.eye(5)[j])
    np.testing.assert_allclose(sqrt_lasso_precision_diag(data, 0.05).d, 1.0, atol=1e-8)


def test_sqrt_lasso_huge_penalty():
    data = make_data(30, 2, 4, rho=0.95)
    np.testing.assert_array_equal(sqrt_lasso_column(data, 0, 100.0), [1.0, 0.0])


def test_sqrt_lasso_grid_oracle():
    data = make_data(50, 3, 6, rho=0.5)
    lam, j = 0.1, 0
    b = sqrt_lasso_column(data, j, lam)
    f = lambda u, v: sqrt_lasso_objective(data, np.array([1.0, u, v]), j, lam)
    lo = np.array([-2.0, -2.0])
    hi = np.array([2.0, 2.0])
    best = None
    for _ in range(6):
        us = np.linspace(lo[0], hi[0], 81)
        vs = np.linspace(lo[1], hi[1], 81)
        vals = np.array([[f(u, v) for v in vs] for u in us])
        i, k = np.unravel_index(np.argmin(vals), vals.shape)
        best = (us[i], vs[k], vals[i, k])
        span = (hi - lo) / 8
        lo = np.array([best[0], best[1]]) - span
        hi = np.array([best[0], best[1]]) + span
    assert sqrt_lasso_objective(data, b, j, lam) <= best[2] + 1e-10
    assert abs(sqrt_lasso_objective(data, b, j, lam) - best[2]) < 1e-4


@pytest.mark.parametrize("seed", range(3))
def test_sqrt_lasso_kkt(seed):
    data = make_data(40, 25, seed, rho=0.5)
    lam = default_lambda_d(data.n, data.p)
    for j in (0, 7, 24):
        b = sqrt_lasso_column(data, j, lam)
        u = data.X @ b
        g = data.X.T @ u / (math.sqrt(data.n) * np.linalg.norm(u))
        free = np.arange(data.p) != j
        assert np.all(np.abs(g[free]) <= lam + 1e-6)
        active = free & (b != 0)
        np.testing.assert_allclose(g[active], -lam * np.sign(b[active]), atol=1e-6)


def test_sqrt_lasso_degenerate_residual():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(20)
    X = np.column_stack([x, x, rng.standard_normal(20)])
    with pytest.raises(DegenerateResidual):
        sqrt_lasso_precision_diag(standardize(X, np.zeros(20)), 0.1)


def test_sqrt_lasso_identity_covariance():
    X = np.random.default_rng(0).standard_normal((400, 100))
    d = sqrt_lasso_precision_diag(standardize(X, np.zeros(400))).d
    assert np.median(np.abs(d - 1)) < 0.01
    assert np.max(np.abs(d - 1)) < 0.05


def test_sqrt_lasso_permutation_invariance():
    data = make_data(30, 40, 3, rho=0.4)
    perm = np.random.default_rng(1).permutation(40)
    d = sqrt_lasso_precision_diag(data).d
    dp = sqrt_lasso_precision_diag(standardize(data.X[:, perm], data.y)).d
    np.testing.assert_allclose(dp, d[perm], rtol=1e-6)


def test_estimate_regime_switch():
    low = estimate_precision_diag(make_data(50, 5, 0))
    high = estimate_precision_diag(make_data(20, 30, 0))
    assert low.method is PrecisionMethod.SAMPLE
    assert high.method is PrecisionMethod.SQRT_LASSO and high.lambda_d > 0
    assert estimate_precision_diag(make_data(50, 5, 0), "ols").method is PrecisionMethod.OLS


def test_precision_diag_invariants():
    with pytest.raises(ValueError):
        PrecisionDiag(np.array([1.0, 0.0]), "sample")
    with pytest.raises(ValueError):
        PrecisionDiag(np.array([1.0, np.nan]), "sample")
    assert PrecisionDiag.ones(3).p == 3
