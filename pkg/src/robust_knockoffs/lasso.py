"""Cyclic coordinate descent for the lasso on a dense design.

Minimizes ``(1/2n) ||y - M b||^2 + lam ||b||_1``.  The solver works on the
Gram matrix ``M.T M / n`` so each coordinate step costs ``O(p)``; the
inner loop is compiled with numba.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._errors import ValidationError

TOL = 1e-7
MAX_PASSES = 10_000


@njit(cache=True, nogil=True)
def _objective(gram, xty, yty, lam, beta):
    quad = 0.0
    p = beta.shape[0]
    for i in range(p):
        if beta[i] != 0.0:
            s = 0.0
            for k in range(p):
                s += gram[i, k] * beta[k]
            quad += beta[i] * s
    lin = 0.0
    l1 = 0.0
    for i in range(p):
        lin += xty[i] * beta[i]
        l1 += abs(beta[i])
    return 0.5 * yty - lin + 0.5 * quad + lam * l1


@njit(cache=True, nogil=True)
def _cd_gram(gram, xty, yty, lam, beta, order, tol, max_passes, trace):
    p = beta.shape[0]
    # resid_corr = xty - gram @ beta
    resid_corr = xty.copy()
    for i in range(p):
        if beta[i] != 0.0:
            for k in range(p):
                resid_corr[k] -= gram[k, i] * beta[i]
    n_pass = 0
    converged = False
    while n_pass < max_passes:
        n_pass += 1
        max_step = 0.0
        for idx in range(p):
            j = order[idx]
            gjj = gram[j, j]
            if gjj <= 0.0:
                continue
            z = resid_corr[j] + gjj * beta[j]
            if z > lam:
                new = (z - lam) / gjj
            elif z < -lam:
                new = (z + lam) / gjj
            else:
                new = 0.0
            delta = new - beta[j]
            if delta != 0.0:
                for k in range(p):
                    resid_corr[k] -= gram[k, j] * delta
                beta[j] = new
                step = abs(delta) * np.sqrt(gjj)
                if step > max_step:
                    max_step = step
        if trace.shape[0] > 0 and n_pass <= trace.shape[0]:
            trace[n_pass - 1] = _objective(gram, xty, yty, lam, beta)
        if max_step < tol:
            converged = True
            break
    return n_pass, converged


@dataclass
class LassoResult:
    beta: np.ndarray
    lam: float
    n_passes: int
    converged: bool
    objective_trace: np.ndarray


def lambda_max(M, y):
    """Smallest penalty at which the lasso solution is identically zero."""
    M = np.asarray(M, dtype=float)
    return float(np.max(np.abs(M.T @ np.asarray(y, dtype=float))) / M.shape[0]) if M.size else 0.0


def lasso_objective(M, y, lam, beta):
    n = M.shape[0]
    r = y - M @ beta
    return float(r @ r / (2 * n) + lam * np.abs(beta).sum())


def lasso_coordinate_descent(M, y, lam, order=None, tol=TOL, max_passes=MAX_PASSES, trace_passes=0):
    """Solve the lasso by cyclic coordinate descent.

    Parameters
    ----------
    M : ndarray, shape (n, m)
    y : ndarray, shape (n,)
    lam : float
        Penalty, must be positive.
    order : array of int, optional
        Coordinate visiting order (a permutation of ``range(m)``).
    tol : float
        Stop once the largest coordinate change in a full pass, measured on
        the unit-norm column scale ``|db_j| * ||M_j|| / sqrt(n)``, is below
        ``tol``.
    trace_passes : int
        Record the objective after each of the first ``trace_passes`` passes.

    Returns
    -------
    LassoResult
        ``converged`` is False (and a RuntimeWarning is emitted) when
        ``max_passes`` is hit; ``beta`` is then the last iterate.
    """
    M = np.ascontiguousarray(M, dtype=float)
    y = np.ascontiguousarray(y, dtype=float).ravel()
    n, m = M.shape
    if y.shape[0] != n:
        raise ValidationError(f"y has length {y.shape[0]}, expected {n}")
    if not lam > 0:
        raise ValidationError(f"lasso penalty must be positive, got {lam}")
    order = np.arange(m) if order is None else np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(m)):
        raise ValidationError("order must be a permutation of the columns")
    gram = M.T @ M / n
    xty = M.T @ y / n
    yty = float(y @ y) / n
    beta = np.zeros(m)
    trace = np.full(int(trace_passes), np.nan)
    n_pass, converged = _cd_gram(gram, xty, yty, float(lam), beta, order, float(tol), int(max_passes), trace)
    if not converged:
        warnings.warn(f"lasso coordinate descent hit {max_passes} passes without converging", RuntimeWarning)
    return LassoResult(beta, float(lam), int(n_pass), bool(converged), trace[: min(n_pass, len(trace))])
