import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_knockoffs import ValidationError
from robust_knockoffs.lasso import lambda_max, lasso_coordinate_descent, lasso_objective


def soft(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0)


def ista(M, y, lam, iters=200_000):
    """Slow proximal-gradient reference solver."""
    n = M.shape[0]
    step = n / np.linalg.eigvalsh(M.T @ M).max()
    b = np.zeros(M.shape[1])
    for _ in range(iters):
        b_new = soft(b - step * M.T @ (M @ b - y) / n, step * lam)
        if np.max(np.abs(b_new - b)) < 1e-14:
            break
        b = b_new
    return b


def test_above_lambda_max_is_zero(rng):
    M, y = rng.standard_normal((30, 5)), rng.standard_normal(30)
    fit = lasso_coordinate_descent(M, y, lambda_max(M, y) * 1.0001)
    np.testing.assert_array_equal(fit.beta, 0)
    assert fit.converged


def test_orthonormal_design_closed_form(rng):
    n = 40
    q, _ = np.linalg.qr(rng.standard_normal((n, 4)))
    M = q * np.sqrt(n)  # M.T M / n = I
    y = rng.standard_normal(n) + M @ np.array([1.0, -0.5, 0.0, 0.2])
    lam = 0.3
    fit = lasso_coordinate_descent(M, y, lam)
    np.testing.assert_allclose(fit.beta, soft(M.T @ y / n, lam), atol=1e-9)


def test_matches_reference_solver(rng):
    M, y = rng.standard_normal((10, 6)), rng.standard_normal(10)
    lam = 0.1 * lambda_max(M, y)
    cd = lasso_coordinate_descent(M, y, lam, tol=1e-10)
    ref = ista(M, y, lam)
    assert abs(lasso_objective(M, y, lam, cd.beta) - lasso_objective(M, y, lam, ref)) <= 1e-6


def test_rejects_bad_input(rng):
    M, y = rng.standard_normal((5, 2)), rng.standard_normal(5)
    with pytest.raises(ValidationError):
        lasso_coordinate_descent(M, y, 0.0)
    with pytest.raises(ValidationError):
        lasso_coordinate_descent(M, y[:4], 0.1)
    with pytest.raises(ValidationError):
        lasso_coordinate_descent(M, y, 0.1, order=[0, 0])


def test_nonconvergence_warns_and_returns_iterate(rng):
    M = rng.standard_normal((20, 8))
    M[:, 1] = M[:, 0] + 1e-3 * rng.standard_normal(20)
    y = rng.standard_normal(20)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        fit = lasso_coordinate_descent(M, y, 1e-4, max_passes=2, tol=1e-14)
    assert not fit.converged and fit.n_passes == 2
    assert any(issubclass(x.category, RuntimeWarning) for x in w)
    assert np.all(np.isfinite(fit.beta))


@given(seed=st.integers(0, 2**31 - 1), frac=st.floats(0.01, 0.9))
def test_objective_decreases_over_passes(seed, frac):
    rng = np.random.default_rng(seed)
    M, y = rng.standard_normal((25, 12)), rng.standard_normal(25)
    lam = frac * lambda_max(M, y)
    fit = lasso_coordinate_descent(M, y, lam, trace_passes=50)
    tr = fit.objective_trace
    assert np.all(np.diff(tr) <= 1e-12 * max(1.0, abs(tr[0])))


@given(seed=st.integers(0, 2**31 - 1))
def test_kkt_conditions(seed):
    rng = np.random.default_rng(seed)
    M, y = rng.standard_normal((30, 8)), rng.standard_normal(30)
    lam = 0.2 * lambda_max(M, y)
    b = lasso_coordinate_descent(M, y, lam, tol=1e-10).beta
    g = M.T @ (y - M @ b) / len(y)
    active = b != 0
    np.testing.assert_allclose(g[active], lam * np.sign(b[active]), atol=1e-7)
    assert np.all(np.abs(g[~active]) <= lam + 1e-7)
