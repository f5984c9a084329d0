import numpy as np
import pytest

from spac.data import standardize


def make_data(n, p, seed, beta=None, noise=1.0, rho=0.0):
    """Standardized random regression problem with equicorrelated columns."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p))
    if rho:
        Z = np.sqrt(1 - rho) * Z + np.sqrt(rho) * rng.standard_normal((n, 1))
    if beta is None:
        beta = np.zeros(p)
        beta[: min(3, p)] = [2.0, -1.5, 1.0][: min(3, p)]
    y = Z @ beta + noise * rng.standard_normal(n)
    return standardize(Z, y)


def orthogonal_design(n, p, seed):
    """Centered columns with ``X' X = n I`` exactly (up to rounding)."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, p))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    return Q * np.sqrt(n)


@pytest.fixture
def report(capsys):
    """Print one pass/fail line per acceptance criterion, bypassing capture."""
    def _report(label, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else ""))
        return ok
    return _report
