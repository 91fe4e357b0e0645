"""A randomized single-feature test showing that large observed KL permits FDR inflation.

The test fires with probability ``2q`` when ``KL_j > 0``, never when
``KL_j < 0``, and with probability ``q`` when ``KL_j = 0``.  When the
knockoff pair is exchangeable for the data-generating law the sign of
``KL_j`` is a fair coin, so the test has level exactly ``q``.  Under a law
for which ``KL_j`` tends to be positive, its rejection rate exceeds ``q``.

Randomness for the coins comes from an explicit seeded generator rather
than from an auxiliary independent response.
"""

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from ._errors import ValidationError
from ._mc import Estimate, proportion
from .diagnostics import GaussianConditionalEvaluator, delta_theta, observed_kl
from .gaussian import GaussianModel, conditional_of, gaussian_mechanism, sample_knockoffs
from .simulator import perturb_precision, resolve_threads, rng_for


@dataclass(frozen=True)
class AdversaryOutcome:
    psi: int
    b_draw: int
    b_prime_draw: int
    kl_hat_j: float


def lower_bound_value(q, c, epsilon):
    """``q (1 + c (1 - e^{-epsilon}))``."""
    if not (0 < q <= 1 and 0 <= c <= 1 and epsilon >= 0):
        raise ValidationError("need q in (0, 1], c in [0, 1] and epsilon >= 0")
    return q * (1 + c * (1 - np.exp(-epsilon)))


def _decide(kl, b, b_prime):
    return int((b == 1 and kl > 0) or (b_prime == 1 and kl == 0))


def psi_test(X, mech, j, q, p_conds, q_conds, seed):
    """Sample knockoffs and both coins, then evaluate the test; deterministic given ``seed``."""
    if not 0 < q <= 0.5:
        raise ValidationError(f"q must lie in (0, 1/2], got {q}")
    X = np.asarray(X, dtype=float)
    rk, rb = rng_for(seed, 0), rng_for(seed, 1)
    Xt = sample_knockoffs(mech, X, rk)
    kl = float(observed_kl(X, Xt, p_conds, q_conds, features=[j]).kl_hat[j]) if X.shape[0] else 0.0
    b = int(rb.random() < 2 * q)
    b_prime = int(rb.random() < q)
    return AdversaryOutcome(_decide(kl, b, b_prime), b, b_prime, kl)


@dataclass(frozen=True)
class AdversaryScenario:
    """True Gaussian law ``P``, estimate ``theta_tilde`` and the tested coordinate ``j``.

    The Q-side law keeps ``P`` for ``x_{-j}`` and replaces the conditional of
    ``x_j`` by the one implied by ``theta_tilde``.
    """

    model: GaussianModel
    theta_tilde: object
    j: int = 0
    n: int = 50
    q: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "mechanism", gaussian_mechanism(self.theta_tilde))
        object.__setattr__(self, "p_eval", GaussianConditionalEvaluator(self.model))
        object.__setattr__(self, "q_eval", GaussianConditionalEvaluator(self.theta_tilde))
        object.__setattr__(self, "q_cond", conditional_of(self.q_eval.theta, self.j))

    @classmethod
    def gaussian(cls, p=10, delta_target=0.3, n=50, q=0.1, j=0, seed=0):
        model = GaussianModel(np.eye(p))
        tt = perturb_precision(model, delta_target, rng_for(seed, 1 << 30))
        return cls(model, tt, j, n, q)

    @property
    def delta_theta(self):
        return delta_theta(self.model, self.theta_tilde)

    def sample_p(self, rng):
        return self.model.sample(self.n, rng)

    def sample_q(self, rng):
        X = self.model.sample(self.n, rng)
        c = self.q_cond
        X[:, self.j] = c.mean(X) + np.sqrt(c.variance) * rng.standard_normal(self.n)
        return X


@dataclass(frozen=True)
class AdversaryLevels:
    level_under_q: Estimate
    level_under_p: Estimate
    c_hat: float
    epsilon: float
    lower_bound: float
    kl_sign_balance_q: Estimate

    def to_dict(self):
        return {
            "level_under_q": self.level_under_q.to_dict(),
            "level_under_p": self.level_under_p.to_dict(),
            "c_hat": self.c_hat,
            "epsilon": self.epsilon,
            "lower_bound": self.lower_bound,
            "kl_sign_balance_q": self.kl_sign_balance_q.to_dict(),
        }


def _side_chunk(scenario, side, indices, seed):
    sampler = scenario.sample_q if side == 0 else scenario.sample_p
    outs = []
    for r in indices:
        X = sampler(rng_for(seed, side, r, 0))
        outs.append(
            psi_test(X, scenario.mechanism, scenario.j, scenario.q, scenario.p_eval, scenario.q_eval, [seed, side, r, 1])
        )
    return outs


def _side(scenario, side, reps, seed, threads):
    if threads == 1:
        return _side_chunk(scenario, side, range(reps), seed)
    chunks = np.array_split(np.arange(reps), min(threads * 4, reps))
    parts = Parallel(n_jobs=threads)(delayed(_side_chunk)(scenario, side, c, seed) for c in chunks)
    # chunks are contiguous and joblib returns them in submission order
    return [o for part in parts for o in part]


def monte_carlo_levels(scenario, reps, seed, threads=None):
    """Rejection rates under the Q-side and P-side laws, with ``(c_hat, epsilon)``.

    ``epsilon`` is the 25th percentile of the positive ``KL_j`` draws under
    ``P`` (0 if there are none), and ``c_hat`` the fraction of P-side draws
    with ``KL_j >= epsilon``.
    """
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    threads = resolve_threads(threads)
    out_q = _side(scenario, 0, reps, seed, threads)
    out_p = _side(scenario, 1, reps, seed, threads)
    kl_p = np.array([o.kl_hat_j for o in out_p])
    kl_q = np.array([o.kl_hat_j for o in out_q])
    positive = kl_p[kl_p > 0]
    eps = float(np.quantile(positive, 0.25)) if positive.size else 0.0
    c_hat = float(np.mean(kl_p >= eps)) if positive.size else 0.0
    nz = kl_q[kl_q != 0]
    return AdversaryLevels(
        level_under_q=proportion([o.psi for o in out_q]),
        level_under_p=proportion([o.psi for o in out_p]),
        c_hat=c_hat,
        epsilon=eps,
        lower_bound=float(lower_bound_value(scenario.q, c_hat, eps)),
        kl_sign_balance_q=proportion(nz > 0),
    )


@dataclass(frozen=True)
class AdversaryConfig:
    p: int = 10
    delta_target: float = 0.3
    n: int = 50
    q: float = 0.1
    j: int = 0
    replicates: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or not 0 <= self.j < self.p:
            raise ValidationError("need p >= 1 and 0 <= j < p")
        if self.n < 0 or self.replicates < 1:
            raise ValidationError("need n >= 0 and replicates >= 1")
        if not 0 < self.q <= 0.5:
            raise ValidationError("q must lie in (0, 1/2]")
        if self.delta_target < 0:
            raise ValidationError("delta_target must be nonnegative")

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def scenario(self):
        return AdversaryScenario.gaussian(self.p, self.delta_target, self.n, self.q, self.j, self.seed)
