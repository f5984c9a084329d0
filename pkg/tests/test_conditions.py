import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spac import conditions as cd
from spac.errors import DegenerateDenominator, NegativeEntry, NotPositiveDefinite

# nonnegative 5x5 correlation matrix found by search; q = 2
HAND_C = np.array([
    [1.00, 0.31, 0.25, 0.17, 0.14],
    [0.31, 1.00, 0.38, 0.32, 0.30],
    [0.25, 0.38, 1.00, 0.20, 0.23],
    [0.17, 0.32, 0.20, 1.00, 0.22],
    [0.14, 0.30, 0.23, 0.22, 1.00],
])


def test_exchangeable_structure():
    C = cd.block_exchangeable_cov(3, 7, (0.4, 0.4, 0.4)).realized
    want = np.full((7, 7), 0.4)
    np.fill_diagonal(want, 1.0)
    np.testing.assert_array_equal(C, want)
    np.testing.assert_array_equal(cd.block_exchangeable_cov(3, 7, (0, 0, 0)).realized, np.eye(7))
    M = cd.block_exchangeable_cov(10, 150, (0.5, 0.7, 0.9))
    assert np.linalg.eigvalsh(M.realized)[0] > 1e-10
    assert M.realized[0, 1] == 0.5 and M.realized[0, 20] == 0.7 and M.realized[20, 21] == 0.9


def test_exchangeable_not_pd():
    with pytest.raises(NotPositiveDefinite) as info:
        cd.block_exchangeable_cov(2, 4, (0.1, 0.99, 0.1))
    assert info.value.min_eigenvalue < 0


def test_ar1_structure():
    C = cd.block_ar1_cov(3, 6, (0.5, 0.3, 0.8)).realized
    assert C[0, 2] == pytest.approx(0.25)
    assert C[1, 4] == pytest.approx(0.3 ** 3)
    assert C[3, 5] == pytest.approx(0.64)
    np.testing.assert_allclose(np.diag(C), 1.0)
    np.testing.assert_allclose(C, C.T)


def test_explicit_validation():
    with pytest.raises(ValueError):
        cd.explicit_cov(np.array([[1.0, 0.2], [0.3, 1.0]]))
    with pytest.raises(ValueError):
        cd.explicit_cov(np.array([[2.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(NotPositiveDefinite):
        cd.explicit_cov(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_block_diagonal_gives_zero_vectors():
    C = np.eye(6)
    C[0, 1] = C[1, 0] = 0.3
    rep = cd.check_irrepresentable(C, 2)
    assert not rep.original_vector.any() and not rep.transformed_vector.any()
    assert rep.original_strong_margin == 1 and rep.transformed_strong_margin == 1
    assert rep.original_weak and rep.transformed_weak


def test_setting_one_audit():
    rep = cd.check_irrepresentable(cd.block_exchangeable_cov(10, 150, (0.5, 0.7, 0.9)), 10)
    assert not rep.original_weak
    assert rep.transformed_strong_margin > 0
    assert rep.transformed_weak
    d = rep.to_dict()
    assert d["original_max"] > 1 and len(d["transformed_vector"]) == 140


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.floats(0.0, 0.8), st.floats(0.0, 0.9), st.floats(0.0, 0.9),
       st.integers(0, 2 ** 20))
def test_exchangeable_closed_form_matches(q, a1, a2, a3, seed):
    p = q + 8
    try:
        C = cd.block_exchangeable_cov(q, p, (a1, a2, a3))
    except NotPositiveDefinite:
        return
    signs = np.random.default_rng(seed).choice([-1.0, 1.0], size=q)
    rep = cd.check_irrepresentable(C, q, signs)
    np.testing.assert_allclose(rep.original_vector, cd.exchangeable_closed_form(q, (a1, a2, a3), signs),
                               atol=1e-10)


def test_transformed_smaller_when_original_fails():
    q, p = 50, 150
    # alpha2 > alpha1 makes the original entries exceed 1; alpha2^2 < alpha1 alpha3 keeps C PD
    for alpha in ((0.3, 0.4, 0.8), (0.5, 0.6, 0.9), (0.2, 0.3, 0.9)):
        rep = cd.check_irrepresentable(cd.block_exchangeable_cov(q, p, alpha), q)
        assert rep.original_vector.max() >= 1
        assert np.all(rep.transformed_vector < rep.original_vector)


def test_weak_tolerance_and_margin_relation():
    rep = cd.check_irrepresentable(cd.block_exchangeable_cov(10, 150, (0.3, 0.5, 0.8)), 10)
    assert rep.transformed_weak == bool(np.all(rep.transformed_vector <= 1 + 1e-10))
    if rep.transformed_strong_margin > 0:
        assert rep.transformed_weak


def test_exchangeable_sufficient_examples():
    assert cd.exchangeable_sufficient_check((0.5, 0.0, 0.9), 1.0, 0.5)
    bound = 0.99 * math.sqrt(0.5 / 0.1) * 0.5
    assert bound == pytest.approx(1.10685, abs=1e-5)
    assert cd.exchangeable_sufficient_check((0.5, 0.7, 0.9), 1.0, 0.01)
    assert not cd.exchangeable_sufficient_check((0.1, 0.7, 0.2), 1.0, 0.01)


def test_exchangeable_corollary_implies_c1():
    q, p = 50, 150
    for alpha in ((0.5, 0.6, 0.9), (0.6, 0.5, 0.8), (0.4, 0.3, 0.7)):
        assert cd.exchangeable_sufficient_check(alpha, 1.0, 0.01)
        rep = cd.check_irrepresentable(cd.block_exchangeable_cov(q, p, alpha), q)
        assert rep.transformed_strong_margin > 0


def test_ar1_sufficient_examples():
    # hand evaluation: 1.25 * sqrt(0.19 / 0.91) * 0.5 * 0.85 / (1.3 * 0.5)
    want = 1.25 * math.sqrt(0.19 / 0.91) * 0.5 * 0.85 / 0.65
    assert cd.ar1_lhs((0.3, 0.5, 0.9)) == pytest.approx(want, rel=1e-12)
    assert cd.ar1_sufficient_check((0.3, 0.5, 0.9), 0.05)
    assert cd.ar1_lhs((0.3, 1e-9, 0.9)) < 1e-8
    with pytest.raises(DegenerateDenominator):
        cd.ar1_sufficient_check((0.3, 0.6, 0.6), 0.05)


def test_general_sufficient_examples():
    assert cd.general_sufficient_check(np.eye(6), 2, 0.1)
    assert cd.general_sufficient_check(HAND_C, 2, 0.05)
    assert cd.check_irrepresentable(HAND_C, 2).transformed_strong_margin > 0
    neg = HAND_C.copy()
    neg[0, 4] = neg[4, 0] = -0.1
    with pytest.raises(NegativeEntry):
        cd.general_sufficient_check(neg, 2, 0.05)


def test_general_terms_by_hand():
    num, den, g = cd.general_sufficient_terms(HAND_C, 2)
    i = 0
    rest = [1, 2, 3, 4]
    Ci = HAND_C[np.ix_(rest, rest)]
    v = HAND_C[rest, i]
    lam = np.linalg.eigvalsh(Ci)
    cosines = [v @ Ci[:, k] / (np.linalg.norm(v) * np.linalg.norm(Ci[:, k])) for k in range(4)]
    phi = max(math.acos(min(1.0, c)) for c in cosines)
    assert num[i] == pytest.approx(1 - v @ v / lam[-1])
    assert den[i] == pytest.approx(1 - v @ v / lam[-1] - v @ v * math.sin(phi) ** 2 / lam[0])
    A = HAND_C[2:, :2] @ np.linalg.inv(HAND_C[:2, :2])
    assert g == pytest.approx(np.abs(A).sum(axis=1).max())


def test_precision_diagonal_is_inverse_conditional_variance():
    for C in (cd.block_exchangeable_cov(4, 12, (0.3, 0.5, 0.8)),
              cd.block_ar1_cov(4, 12, (0.3, 0.5, 0.8)),
              cd.random_c1_covariance(12, 4, seed=3),
              cd.explicit_cov(HAND_C)):
        d = cd.precision_diagonal(C)
        for j in range(C.p):
            assert d[j] == pytest.approx(1 / cd.conditional_variance(C, j), abs=1e-10)


def test_random_c1_determinism_and_validity():
    a = cd.random_c1_covariance(30, 5, seed=4).realized
    b = cd.random_c1_covariance(30, 5, seed=4).realized
    assert np.array_equal(a, b)
    np.testing.assert_allclose(np.diag(a), 1.0)
    assert np.linalg.eigvalsh(a)[0] > 0
    assert not np.array_equal(a, cd.random_c1_covariance(30, 5, seed=5).realized)
    with pytest.raises(ValueError):
        cd.random_c1_covariance(30, 5, (2.0, 1.0))
