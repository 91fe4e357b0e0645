"""Observed-KL diagnostic and the FDR-inflation bounds built on it.

For each feature the observed KL statistic sums, over observations, the
log ratio::

    log P_j(x_ij) + log Q_j(xt_ij) - log Q_j(x_ij) - log P_j(xt_ij)

with every conditional evaluated given the *original* ``x_{i,-j}``.  It
needs the true conditionals ``P_j``, so it is only available in
simulation or when the caller supplies a reference model.

A conditional evaluator is any callable ``f(j, values, X)`` returning the
log density (or log pmf) of ``values[i]`` for coordinate ``j`` given the
other coordinates of row ``X[i]``.
"""

from dataclasses import dataclass

import numpy as np

from ._errors import NumericalError, ValidationError
from ._mc import wilson_interval
from .gaussian import conditional_of, precision_array


@dataclass(frozen=True)
class KlDiagnostics:
    kl_hat: np.ndarray
    max_kl: float
    per_observation_terms: np.ndarray

    def signed(self, w):
        """``sign(W_j) * KL_j``, the orientation used when conditioning on ``|W_j|``."""
        return np.sign(np.asarray(w, dtype=float)) * self.kl_hat


class GaussianConditionalEvaluator:
    """Log densities of the Gaussian conditionals implied by a precision matrix."""

    def __init__(self, theta):
        theta = precision_array(theta)
        self.theta = theta
        self.conditionals = [conditional_of(theta, j) for j in range(theta.shape[0])]

    def __call__(self, j, values, X):
        return self.conditionals[j].logpdf(values, X)


class BernoulliProductEvaluator:
    """Independent binary coordinates with ``P(x_j = 1) = probs[j]``."""

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=float)
        if np.any((probs <= 0) | (probs >= 1)):
            raise ValidationError("Bernoulli probabilities must lie strictly inside (0, 1)")
        self.log1 = np.log(probs)
        self.log0 = np.log1p(-probs)

    def __call__(self, j, values, X):
        values = np.asarray(values)
        return np.where(values == 1, self.log1[j], self.log0[j])


class TableConditionalEvaluator:
    """Discrete conditionals read off a joint pmf table (integer-coded data)."""

    def __init__(self, pmf):
        from .discrete import conditional_table

        pmf = getattr(pmf, "pmf", pmf)
        self.log_tables = [np.log(conditional_table(pmf, j).table) for j in range(pmf.ndim)]

    def __call__(self, j, values, X):
        idx = np.asarray(X, dtype=int).copy()
        idx[:, j] = np.asarray(values, dtype=int)
        return self.log_tables[j][tuple(idx.T)]


def observed_kl(X, Xt, p_conds, q_conds, features=None):
    """Per-observation log ratios and their column sums.

    ``features`` restricts the computation to a subset of columns (the
    others are left at 0).
    """
    X = np.asarray(X, dtype=float)
    Xt = np.asarray(Xt, dtype=float)
    if X.shape != Xt.shape or X.ndim != 2:
        raise ValidationError(f"X {X.shape} and X_tilde {Xt.shape} must be matching 2-d arrays")
    n, p = X.shape
    features = range(p) if features is None else features
    terms = np.zeros((n, p))
    for j in features:
        x, xt = X[:, j], Xt[:, j]
        # grouped so that P == Q gives exact zeros and a column swap gives exact negation
        with np.errstate(invalid="ignore", over="ignore"):
            terms[:, j] = (p_conds(j, x, X) - q_conds(j, x, X)) + (q_conds(j, xt, X) - p_conds(j, xt, X))
    if not np.all(np.isfinite(terms)):
        i, j = np.argwhere(~np.isfinite(terms))[0]
        raise NumericalError(f"non-finite log density at observation {i}, feature {j}")
    kl = terms.sum(axis=0)
    return KlDiagnostics(kl, float(kl.max()) if p else 0.0, terms)


def gaussian_conditional_evaluator(theta):
    return GaussianConditionalEvaluator(theta)


def gaussian_kl_terms(X, Xt, theta, theta_tilde):
    """Closed form of the Gaussian log ratio, used as an independent check.

    With ``diff = theta_tilde - theta`` the per-observation term for
    feature ``j`` is ``(x_j - xt_j) * (X_i @ diff[:, j] - diff[j, j] * (x_j - xt_j) / 2)``.
    """
    diff = precision_array(theta_tilde) - precision_array(theta)
    gap = np.asarray(X) - np.asarray(Xt)
    return gap * (np.asarray(X) @ diff - np.diag(diff)[None, :] * gap / 2)


def _sym_sqrt_inv(theta):
    w, v = np.linalg.eigh(theta)
    return (v / np.sqrt(w)) @ v.T


def delta_theta(theta, theta_tilde):
    """Columnwise precision error ``max_j theta_jj^{-1/2} ||theta^{-1/2}(theta_tilde_j - theta_j)||``."""
    theta = precision_array(theta)
    diff = precision_array(theta_tilde) - theta
    cols = np.linalg.norm(_sym_sqrt_inv(theta) @ diff, axis=0)
    return float(np.max(cols / np.sqrt(np.diag(theta))))


def lemma2_bound(n, p, delta):
    """High-probability bound ``n delta^2 / 2 + 2 delta sqrt(n log p)`` on ``max_j KL_j``."""
    if p < 2:
        raise ValidationError("the union bound needs p >= 2")
    if delta < 0:
        raise ValidationError("delta must be nonnegative")
    return n * delta**2 / 2 + 2 * delta * np.sqrt(n * np.log(p))


def gaussian_log_ratio_delta(delta_th, n, p):
    """Per-observation log-ratio scale that holds w.p. >= 1 - 1/p for Gaussian knockoffs.

    ``2 sqrt(r^2 + r^4) (1 + 2 sqrt(log(np) / n))`` with ``r = delta_th / (1 - delta_th)``.
    """
    if not 0 <= delta_th < 1:
        raise ValidationError(f"delta_theta must lie in [0, 1), got {delta_th}")
    r = delta_th / (1 - delta_th)
    return 2 * np.sqrt(r**2 + r**4) * (1 + 2 * np.sqrt(np.log(n * p) / n))


def lemma4_bound(n, p, delta_th):
    """Explicit Gaussian bound on ``max_j KL_j``, holding w.p. >= 1 - 2/p."""
    return lemma2_bound(n, p, gaussian_log_ratio_delta(delta_th, n, p))


def lemma4_leading_term(n, p, delta_th):
    return 4 * delta_th * np.sqrt(n * np.log(p))


def event_e_delta_check(per_observation_terms, delta):
    """True iff ``sum_i term_ij^2 <= n delta^2`` for every feature ``j``."""
    t = np.asarray(per_observation_terms, dtype=float)
    n = t.shape[0]
    return bool(np.all((t**2).sum(axis=0) <= n * delta**2))


def realized_delta(per_observation_terms):
    """Smallest ``delta`` for which :func:`event_e_delta_check` holds on these terms."""
    t = np.asarray(per_observation_terms, dtype=float)
    n = t.shape[0]
    return float(np.sqrt((t**2).sum(axis=0).max() / n)) if n else 0.0


def default_epsilon_grid():
    """``0`` followed by 50 geometrically spaced points on ``[1e-3, 5]``."""
    return np.concatenate([[0.0], np.geomspace(1e-3, 5.0, 50)])


@dataclass(frozen=True)
class BoundReport:
    q: float
    epsilon_grid: np.ndarray
    exceedance: np.ndarray
    inflation_bound: np.ndarray
    best_bound: float
    best_epsilon: float
    inflation_bound_lo: np.ndarray | None = None
    inflation_bound_hi: np.ndarray | None = None
    delta_theta: float | None = None
    lemma2_bound: float | None = None
    lemma4_bound: float | None = None

    @property
    def vacuous(self):
        return self.best_bound >= 1

    @property
    def modified_fdr_bound(self):
        # same right-hand side bounds E[|S n H0| / (|S| + 1/q)] for the knockoff variant
        return self.best_bound

    def to_dict(self):
        def arr(a):
            return None if a is None else [float(v) for v in a]

        return {
            "q": self.q,
            "epsilon_grid": arr(self.epsilon_grid),
            "exceedance": arr(self.exceedance),
            "inflation_bound": arr(self.inflation_bound),
            "inflation_bound_lo": arr(self.inflation_bound_lo),
            "inflation_bound_hi": arr(self.inflation_bound_hi),
            "best_bound": self.best_bound,
            "best_epsilon": self.best_epsilon,
            "modified_fdr_bound": self.modified_fdr_bound,
            "vacuous": self.vacuous,
            "delta_theta": self.delta_theta,
            "lemma2_bound": self.lemma2_bound,
            "lemma4_bound": self.lemma4_bound,
        }


def inflation_bound(q, epsilon_grid, exceedance, exceedance_ci=None, **extra):
    """``q e^eps + P(max_null KL > eps)`` on a grid, and its minimum.

    ``exceedance_ci`` is an optional ``(lo, hi)`` pair of arrays that is
    carried through to interval bounds.  Extra keyword arguments fill the
    remaining :class:`BoundReport` fields.
    """
    eps = np.asarray(epsilon_grid, dtype=float)
    exc = np.asarray(exceedance, dtype=float)
    if eps.shape != exc.shape:
        raise ValidationError("epsilon_grid and exceedance must have the same length")
    if np.any(eps < 0):
        raise ValidationError("epsilon must be nonnegative")
    if np.any((exc < 0) | (exc > 1)):
        raise ValidationError("exceedance probabilities must lie in [0, 1]")
    bound = q * np.exp(eps) + exc
    k = int(np.argmin(bound))
    lo = hi = None
    if exceedance_ci is not None:
        lo = q * np.exp(eps) + np.asarray(exceedance_ci[0], dtype=float)
        hi = q * np.exp(eps) + np.asarray(exceedance_ci[1], dtype=float)
    return BoundReport(
        q=float(q),
        epsilon_grid=eps,
        exceedance=exc,
        inflation_bound=bound,
        best_bound=float(bound[k]),
        best_epsilon=float(eps[k]),
        inflation_bound_lo=lo,
        inflation_bound_hi=hi,
        **extra,
    )


def exceedance_from_samples(max_kl, epsilon_grid):
    """Empirical ``P(max KL > eps)`` with Wilson intervals, one entry per grid point."""
    max_kl = np.asarray(max_kl, dtype=float)
    eps = np.asarray(epsilon_grid, dtype=float)
    counts = (max_kl[:, None] > eps[None, :]).sum(axis=0)
    n = max_kl.size
    lo, hi = wilson_interval(counts, n)
    return counts / max(n, 1), (lo, hi)
