"""Flip-sign feature statistics computed on ``[X, X_tilde]``."""

import math
from dataclasses import dataclass

import numpy as np

from ._errors import ValidationError
from .lasso import lambda_max, lasso_coordinate_descent

MARGINAL = "marginal_correlation_difference"
LASSO = "lasso_coefficient_difference"
LASSO_FLIP_TOL = 1e-6


@dataclass(frozen=True)
class AugmentedDesign:
    """Column-concatenated ``[X, X_tilde]`` of shape ``(n, 2p)``."""

    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2 or cols.shape[1] % 2:
            raise ValidationError(f"augmented design needs an even column count, got {cols.shape}")
        if not np.all(np.isfinite(cols)):
            raise ValidationError("augmented design has non-finite entries")
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_pair(cls, X, Xt):
        X = np.asarray(X, dtype=float)
        Xt = np.asarray(Xt, dtype=float)
        if X.shape != Xt.shape:
            raise ValidationError(f"X {X.shape} and X_tilde {Xt.shape} shapes differ")
        return cls(np.hstack([X, Xt]))

    @property
    def n(self):
        return self.columns.shape[0]

    @property
    def p(self):
        return self.columns.shape[1] // 2

    @property
    def X(self):
        return self.columns[:, : self.p]

    @property
    def Xt(self):
        return self.columns[:, self.p :]

    def swap(self, subset):
        """Design with ``X_j`` and ``X_tilde_j`` exchanged for each ``j`` in ``subset``."""
        p = self.p
        perm = np.arange(2 * p)
        for j in subset:
            perm[j], perm[p + j] = p + j, j
        return AugmentedDesign(self.columns[:, perm])


@dataclass(frozen=True)
class WStatistics:
    w: np.ndarray
    statistic_kind: str
    lambda_used: float = 0.0
    flip_sign_checked: bool = False


def _check_y(design, Y):
    Y = np.asarray(Y, dtype=float).ravel()
    if Y.shape[0] != design.n:
        raise ValidationError(f"Y has length {Y.shape[0]}, expected {design.n}")
    return Y


def marginal_stats(design, Y):
    """``W_j = |X_j^T Y| - |X_tilde_j^T Y|``."""
    Y = _check_y(design, Y)
    # correctly rounded sums, so a column's inner product does not depend on its position
    prod = (design.columns * Y[:, None]).T
    z = np.abs(np.array([math.fsum(col) for col in prod]))
    return WStatistics(z[: design.p] - z[design.p :], MARGINAL)


def _swap_invariant_order(design, seed):
    """Column visiting order that follows the variables, not their positions.

    Pairs are visited in a seeded random order; within a pair the column
    whose values are lexicographically smaller goes first.  Swapping
    ``X_j`` and ``X_tilde_j`` therefore leaves the sequence of visited data
    columns unchanged.
    """
    p = design.p
    diff = design.X - design.Xt
    nz = diff != 0
    first = np.argmax(nz, axis=0)
    lead = diff[first, np.arange(p)]
    original_first = (lead < 0) | ~nz.any(axis=0)
    order = []
    for j in np.random.default_rng(seed).permutation(p):
        order += [j, p + j] if original_first[j] else [p + j, j]
    return np.array(order)


def lcd_stats(design, Y, lambda_fraction=0.1, seed=0):
    """Lasso coefficient difference ``W_j = |b_j| - |b_{j+p}|``.

    The lasso is fit on the augmented design at
    ``lambda_fraction * lambda_max``.  Coordinates are visited pair by pair
    in a seeded random order, and the problem is solved on the reordered
    design, so the swapped design yields a bitwise identical problem even
    when the lasso solution is not unique.  Column pairs that are exactly
    equal share their total coefficient evenly, which keeps the solution
    optimal and gives ``W_j = 0``.
    """
    if not 0 < lambda_fraction <= 1:
        raise ValidationError(f"lambda_fraction must lie in (0, 1], got {lambda_fraction}")
    Y = _check_y(design, Y)
    p = design.p
    order = _swap_invariant_order(design, seed)
    M = design.columns[:, order]
    lam = lambda_fraction * lambda_max(M, Y)
    if lam <= 0:
        return WStatistics(np.zeros(p), LASSO, 0.0)
    fit = lasso_coordinate_descent(M, Y, lam)
    beta = np.empty(2 * p)
    beta[order] = fit.beta
    tied = np.all(design.X == design.Xt, axis=0)
    if tied.any():
        avg = (beta[:p] + beta[p:]) / 2
        beta[:p][tied] = avg[tied]
        beta[p:][tied] = avg[tied]
    b = np.abs(beta)
    return WStatistics(b[:p] - b[p:], LASSO, lam)


def compute_w(kind, design, Y, lambda_fraction=0.1, seed=0):
    """Dispatch on the short CLI names ``marginal`` / ``lcd`` or the long kind names."""
    if kind in ("marginal", MARGINAL):
        return marginal_stats(design, Y)
    if kind in ("lcd", LASSO):
        return lcd_stats(design, Y, lambda_fraction=lambda_fraction, seed=seed)
    raise ValidationError(f"unknown statistic {kind!r}")


@dataclass(frozen=True)
class FlipSignCheck:
    ok: bool
    index: int | None = None
    max_error: float = 0.0

    def __bool__(self):
        return self.ok


def check_flip_sign(stat_fn, design, Y, subset, tol=None, **kwargs):
    """Recompute W on the swapped design and compare with ``+-W``.

    Exact comparison for marginal statistics; ``1e-6`` for the lasso unless
    ``tol`` is given.  Returns a falsy :class:`FlipSignCheck` carrying the
    first offending index on failure.
    """
    base = stat_fn(design, Y, **kwargs)
    swapped = stat_fn(design.swap(subset), Y, **kwargs)
    if tol is None:
        tol = 0.0 if base.statistic_kind == MARGINAL else LASSO_FLIP_TOL
    sign = np.ones(design.p)
    sign[list(subset)] = -1
    err = np.abs(swapped.w - sign * base.w)
    bad = np.flatnonzero(err > tol)
    if bad.size:
        return FlipSignCheck(False, int(bad[0]), float(err.max()))
    return FlipSignCheck(True, None, float(err.max(initial=0.0)))
