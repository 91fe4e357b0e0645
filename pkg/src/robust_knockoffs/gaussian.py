"""Gaussian knockoffs built from an estimated precision matrix.

Given a symmetric estimate ``theta_tilde`` with positive diagonal and a
nonnegative diagonal matrix ``D``, knockoffs are drawn row by row as::

    x_tilde | x  ~  N((I - D theta_tilde) x,  2D - D theta_tilde D)

``theta_tilde`` does not need to be positive semidefinite; only the
sampling covariance ``2D - D theta_tilde D`` does.  The feature mean is
fixed at zero, so callers must center their data.
"""

from dataclasses import dataclass, field

import numpy as np

from ._errors import NumericalError, ValidationError

EIG_CLIP = 1e-10
MAX_HALVINGS = 60


def _as_square(m, name):
    m = np.array(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True)
class PrecisionEstimate:
    """Symmetric estimate of a precision matrix with positive diagonal.

    The matrix is symmetrized as ``(M + M.T) / 2`` on construction.
    ``is_psd`` records whether the smallest eigenvalue is >= -1e-10.
    """

    theta_tilde: np.ndarray
    is_psd: bool = field(init=False)

    def __post_init__(self):
        m = _as_square(self.theta_tilde, "theta_tilde")
        m = (m + m.T) / 2
        if np.any(np.diag(m) <= 0):
            bad = int(np.flatnonzero(np.diag(m) <= 0)[0])
            raise ValidationError(f"theta_tilde diagonal must be positive (entry {bad})")
        m.setflags(write=False)
        object.__setattr__(self, "theta_tilde", m)
        object.__setattr__(self, "is_psd", bool(np.linalg.eigvalsh(m)[0] >= -EIG_CLIP))

    @property
    def p(self):
        return self.theta_tilde.shape[0]


@dataclass(frozen=True)
class GaussianModel:
    """Centered Gaussian feature law ``N(0, theta^{-1})``."""

    theta: np.ndarray

    def __post_init__(self):
        m = _as_square(self.theta, "theta")
        if not np.allclose(m, m.T, rtol=1e-10, atol=1e-12):
            raise ValidationError("theta must be symmetric")
        m = (m + m.T) / 2
        if np.linalg.eigvalsh(m)[0] <= EIG_CLIP:
            raise ValidationError("theta must be positive definite")
        m.setflags(write=False)
        object.__setattr__(self, "theta", m)

    @property
    def p(self):
        return self.theta.shape[0]

    @property
    def covariance(self):
        return np.linalg.inv(self.theta)

    def sample(self, n, rng):
        """Draw ``n`` rows from ``N(0, theta^{-1})``."""
        rng = np.random.default_rng(rng)
        # theta = L L^T  =>  x = L^{-T} z has covariance theta^{-1}
        chol = np.linalg.cholesky(self.theta)
        z = rng.standard_normal((n, self.p))
        return np.linalg.solve(chol.T, z.T).T

    def as_estimate(self):
        return PrecisionEstimate(self.theta)


@dataclass(frozen=True)
class ConditionalGaussian:
    """Law of ``x_j`` given the other coordinates: ``N(x_{-j} @ coeffs, variance)``."""

    j: int
    coeffs: np.ndarray
    variance: float

    def mean(self, X):
        """Conditional mean for each row of the full ``(n, p)`` matrix ``X``."""
        X = np.asarray(X, dtype=float)
        return np.delete(X, self.j, axis=1) @ self.coeffs

    def logpdf(self, values, X):
        """Log-density of ``values`` (one per row) given the rest of each row of ``X``."""
        resid = np.asarray(values, dtype=float) - self.mean(X)
        return -0.5 * resid**2 / self.variance - 0.5 * np.log(2 * np.pi * self.variance)


def conditional_of(theta, j):
    """Conditional law of coordinate ``j`` under precision ``theta``.

    Regression coefficients are ``-theta[-j, j] / theta[j, j]`` and the
    variance is ``1 / theta[j, j]``.  ``theta`` need not be PSD.
    """
    theta = precision_array(theta)
    p = theta.shape[0]
    if not 0 <= j < p:
        raise ValidationError(f"feature index {j} out of range for p={p}")
    tjj = theta[j, j]
    if not tjj > 0:
        raise ValidationError(f"theta[{j},{j}] = {tjj} must be positive")
    coeffs = -np.delete(theta[:, j], j) / tjj
    return ConditionalGaussian(j=j, coeffs=coeffs, variance=1.0 / tjj)


@dataclass(frozen=True)
class KnockoffMechanism:
    """Immutable Gaussian knockoff sampler; safe to share between workers."""

    theta_tilde: PrecisionEstimate
    diag_d: np.ndarray
    cond_mean_map: np.ndarray
    cond_cov_root: np.ndarray

    @property
    def p(self):
        return self.diag_d.shape[0]

    @property
    def cond_cov(self):
        d = self.diag_d
        return 2 * np.diag(d) - d[:, None] * self.theta_tilde.theta_tilde * d[None, :]


def precision_array(theta):
    """Plain array view of a ``GaussianModel``, ``PrecisionEstimate`` or matrix."""
    if isinstance(theta, GaussianModel):
        return theta.theta
    if isinstance(theta, PrecisionEstimate):
        return theta.theta_tilde
    return np.asarray(theta, dtype=float)


def _sampling_cov(theta_tilde, d):
    return 2 * np.diag(d) - d[:, None] * theta_tilde * d[None, :]


def _min_eig(m):
    return np.linalg.eigvalsh(m)[0]


def select_equicorrelated_d(theta_tilde):
    """Choose the diagonal of ``D`` for the Gaussian knockoff mechanism.

    For positive definite ``theta_tilde`` the equicorrelated choice is used
    on the correlation scale of ``Sigma = theta_tilde^{-1}``:
    ``d_j = min(1, 2 * lambda_min(corr(Sigma))) * Sigma_jj``.  Otherwise
    ``d_j = 1 / theta_tilde_jj`` is halved until ``2D - D theta_tilde D`` is
    PSD up to -1e-10.  The halving loop also guards the PD branch against
    round-off at the feasibility boundary.

    Raises
    ------
    NumericalError
        If 60 halvings do not reach feasibility.
    """
    if not isinstance(theta_tilde, PrecisionEstimate):
        theta_tilde = PrecisionEstimate(theta_tilde)
    tt = theta_tilde.theta_tilde
    d = None
    if theta_tilde.is_psd:
        try:
            sigma = np.linalg.inv(tt)
            ev = np.linalg.eigvalsh(sigma)
        except np.linalg.LinAlgError:
            ev = None
        if ev is not None and ev[0] > 0 and np.all(np.diag(sigma) > 0):
            sd = np.sqrt(np.diag(sigma))
            corr = sigma / np.outer(sd, sd)
            s = min(1.0, 2 * np.linalg.eigvalsh(corr)[0])
            d = s * np.diag(sigma)
    if d is None:
        d = 1.0 / np.diag(tt)
    for _ in range(MAX_HALVINGS + 1):
        if _min_eig(_sampling_cov(tt, d)) >= -EIG_CLIP:
            return d
        d = d / 2
    raise NumericalError("could not make 2D - D theta_tilde D PSD after 60 halvings")


def build_mechanism(theta_tilde, diag_d):
    """Assemble the knockoff sampler for ``theta_tilde`` and ``D = diag(diag_d)``.

    The covariance root is the symmetric eigendecomposition root of
    ``2D - D theta_tilde D`` with eigenvalues in ``[-1e-10, 0)`` set to 0.
    """
    if not isinstance(theta_tilde, PrecisionEstimate):
        theta_tilde = PrecisionEstimate(theta_tilde)
    d = np.array(diag_d, dtype=float).ravel()
    if d.shape != (theta_tilde.p,):
        raise ValidationError(f"diag_d must have length {theta_tilde.p}, got {d.shape}")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValidationError("diag_d must be finite and nonnegative")
    tt = theta_tilde.theta_tilde
    cov = _sampling_cov(tt, d)
    cov = (cov + cov.T) / 2
    w, v = np.linalg.eigh(cov)
    if w[0] < -EIG_CLIP:
        raise NumericalError(
            f"2D - D theta_tilde D has eigenvalue {w[0]:.3e} < -1e-10; D is infeasible"
        )
    w = np.clip(w, 0, None)
    root = (v * np.sqrt(w)) @ v.T
    root = (root + root.T) / 2
    mean_map = np.eye(len(d)) - d[:, None] * tt
    for a in (d, mean_map, root):
        a.setflags(write=False)
    return KnockoffMechanism(theta_tilde, d, mean_map, root)


def gaussian_mechanism(theta_tilde):
    """Mechanism with the default equicorrelated ``D``."""
    if not isinstance(theta_tilde, PrecisionEstimate):
        theta_tilde = PrecisionEstimate(theta_tilde)
    return build_mechanism(theta_tilde, select_equicorrelated_d(theta_tilde))


def sample_knockoffs(mech, X, seed):
    """Draw one knockoff row per row of ``X``; deterministic given ``seed``.

    ``seed`` may be an integer, a ``SeedSequence`` or a ``Generator``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != mech.p:
        raise ValidationError(f"X must have {mech.p} columns, got shape {X.shape}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(X.shape)
    return X @ mech.cond_mean_map.T + z @ mech.cond_cov_root
