"""Monte Carlo harness: scenarios, replicates and FDR / power summaries.

Every replicate draws its randomness from ``SeedSequence([seed, index])``
feeding a Philox generator, so results do not depend on how replicates
are scheduled across workers.  Records are always merged in index order.
"""

import os
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.special import expit, logit

from ._errors import KnockoffError, ValidationError
from ._mc import Estimate, mean_estimate, proportion
from .diagnostics import (
    BernoulliProductEvaluator,
    GaussianConditionalEvaluator,
    default_epsilon_grid,
    delta_theta,
    exceedance_from_samples,
    gaussian_log_ratio_delta,
    event_e_delta_check,
    inflation_bound,
    lemma2_bound,
    lemma4_bound,
    observed_kl,
)
from .filter import KNOCKOFF_PLUS, normalize_variant, select
from .gaussian import GaussianModel, PrecisionEstimate, gaussian_mechanism, sample_knockoffs
from .lasso import lambda_max, lasso_coordinate_descent
from .statistics import AugmentedDesign, compute_w

RESPONSE_KINDS = ("linear_gaussian", "logistic")
PRECISION_KINDS = ("exact", "column_perturb", "nodewise_lasso")
STATISTIC_KINDS = ("lcd", "marginal")


def rng_for(seed, *key):
    """Counter-based generator keyed by ``(seed, *key)``; ``seed`` may itself be a sequence."""
    base = [int(s) for s in np.atleast_1d(seed)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([*base, *map(int, key)])))


# --- scenario ingredients -------------------------------------------------


def gen_ar1_precision(p, rho):
    """Inverse of the AR(1) correlation ``rho^|i-j|``, via its tridiagonal closed form."""
    if not -1 < rho < 1:
        raise ValidationError(f"AR(1) coefficient must satisfy |rho| < 1, got {rho}")
    if p == 1:
        return GaussianModel(np.ones((1, 1)))
    theta = np.zeros((p, p))
    idx = np.arange(p)
    theta[idx, idx] = 1 + rho**2
    theta[0, 0] = theta[-1, -1] = 1.0
    theta[idx[:-1], idx[1:]] = -rho
    theta[idx[1:], idx[:-1]] = -rho
    return GaussianModel(theta / (1 - rho**2))


def perturb_precision(theta, delta_target, seed):
    """Symmetric random perturbation of ``theta`` rescaled to a given ``delta_theta``.

    ``delta_theta`` is homogeneous of degree one in the perturbation, so a
    single rescaling hits the target.
    """
    th = theta.theta if isinstance(theta, GaussianModel) else np.asarray(theta, dtype=float)
    if delta_target < 0:
        raise ValidationError("delta_target must be nonnegative")
    if delta_target == 0:
        return PrecisionEstimate(th.copy())
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(th.shape)
    e = (e + e.T) / 2
    unit = delta_theta(th, th + e)
    pert = th + e * (delta_target / unit)
    if np.any(np.diag(pert) <= 0):
        raise ValidationError(f"delta_target={delta_target} makes the diagonal nonpositive")
    return PrecisionEstimate(pert)


def nodewise_estimate(unlabeled_X, lambda_fraction=0.1):
    """Precision estimate from per-feature lasso regressions.

    Column ``j`` is ``1 / s2`` on the diagonal and ``-b / s2`` off it, where
    ``b`` regresses ``x_j`` on the other features at
    ``lambda_fraction * lambda_max`` and ``s2`` is the mean squared
    residual.  The result is symmetrized and may be indefinite.
    """
    X = np.asarray(unlabeled_X, dtype=float)
    n, p = X.shape
    if not lambda_fraction > 0:
        raise ValidationError("lambda_fraction must be positive")
    theta = np.zeros((p, p))
    for j in range(p):
        y = X[:, j]
        rest = np.delete(X, j, axis=1)
        b = np.zeros(p - 1)
        if p > 1:
            lam = lambda_fraction * lambda_max(rest, y)
            if lam > 0:
                b = lasso_coordinate_descent(rest, y, lam).beta
        resid = y - rest @ b
        s2 = float(resid @ resid) / n
        if s2 <= 0:
            raise ValidationError(f"feature {j} has zero residual variance")
        theta[j, j] = 1 / s2
        theta[np.arange(p) != j, j] = -b / s2
    return PrecisionEstimate((theta + theta.T) / 2)


# --- configuration --------------------------------------------------------


@dataclass(frozen=True)
class PrecisionMode:
    kind: str = "exact"
    delta_target: float = 0.0
    unlabeled_n: int = 0
    lambda_fraction: float = 0.1

    def __post_init__(self):
        if self.kind not in PRECISION_KINDS:
            raise ValidationError(f"unknown precision mode {self.kind!r}")
        if self.kind == "column_perturb" and self.delta_target < 0:
            raise ValidationError("delta_target must be nonnegative")
        if self.kind == "nodewise_lasso" and (self.unlabeled_n < 2 or self.lambda_fraction <= 0):
            raise ValidationError("nodewise_lasso needs unlabeled_n >= 2 and lambda_fraction > 0")

    def to_dict(self):
        if self.kind == "exact":
            return {"kind": "exact"}
        if self.kind == "column_perturb":
            return {"kind": self.kind, "delta_target": self.delta_target}
        return {"kind": self.kind, "unlabeled_n": self.unlabeled_n, "lambda_fraction": self.lambda_fraction}

    @classmethod
    def from_dict(cls, d):
        allowed = {"kind", "delta_target", "unlabeled_n", "lambda_fraction"}
        unknown = set(d) - allowed
        if unknown:
            raise ValidationError(f"unknown precision_mode keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 300
    p: int = 50
    ar1_rho: float = 0.5
    signal_count: int = 10
    signal_amplitude: float = 3.5
    response_kind: str = "linear_gaussian"
    q: float = 0.2
    statistic_kind: str = "lcd"
    lasso_lambda_fraction: float = 0.1
    variant: str = KNOCKOFF_PLUS
    precision_mode: PrecisionMode = field(default_factory=PrecisionMode)
    replicates: int = 100
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.precision_mode, dict):
            object.__setattr__(self, "precision_mode", PrecisionMode.from_dict(self.precision_mode))
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        if self.n < 0 or self.p < 1:
            raise ValidationError("need n >= 0 and p >= 1")
        if not 0 <= self.signal_count <= self.p:
            raise ValidationError("signal_count must lie in [0, p]")
        if not -1 < self.ar1_rho < 1:
            raise ValidationError("ar1_rho must lie in (-1, 1)")
        if self.response_kind not in RESPONSE_KINDS:
            raise ValidationError(f"unknown response_kind {self.response_kind!r}")
        if self.statistic_kind not in STATISTIC_KINDS:
            raise ValidationError(f"unknown statistic_kind {self.statistic_kind!r}")
        if not 0 < self.q < 1:
            raise ValidationError("q must lie in (0, 1)")
        if not 0 < self.lasso_lambda_fraction <= 1:
            raise ValidationError("lasso_lambda_fraction must lie in (0, 1]")
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")

    def to_dict(self):
        d = asdict(self)
        d["precision_mode"] = self.precision_mode.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SimulationTruth:
    nonnull_set: frozenset
    beta: np.ndarray

    @property
    def nulls(self):
        return np.flatnonzero(self.beta == 0)


def make_truth(config):
    """``k`` evenly spaced non-nulls with amplitudes of alternating sign."""
    p, k = config.p, config.signal_count
    beta = np.zeros(p)
    idx = (np.arange(k) * p) // k if k else np.array([], dtype=int)
    beta[idx] = config.signal_amplitude * np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    return SimulationTruth(frozenset(np.flatnonzero(beta).tolist()), beta)


@dataclass(frozen=True)
class Scenario:
    """Everything shared by all replicates of a config; immutable."""

    config: ScenarioConfig
    model: GaussianModel
    theta_tilde: PrecisionEstimate
    mechanism: object
    truth: SimulationTruth
    delta_theta: float


def prepare_scenario(config):
    """Build the truth, the (fixed) precision estimate and the knockoff mechanism."""
    model = gen_ar1_precision(config.p, config.ar1_rho)
    mode = config.precision_mode
    if mode.kind == "exact":
        tt = model.as_estimate()
    elif mode.kind == "column_perturb":
        tt = perturb_precision(model, mode.delta_target, rng_for(config.seed, 1 << 30, 1))
    else:
        unlabeled = model.sample(mode.unlabeled_n, rng_for(config.seed, 1 << 30, 2))
        tt = nodewise_estimate(unlabeled, mode.lambda_fraction)
    mech = gaussian_mechanism(tt)
    return Scenario(config, model, tt, mech, make_truth(config), delta_theta(model, tt))


# --- replicates -------------------------------------------------------------


@dataclass(frozen=True)
class ReplicateRecord:
    index: int
    w: np.ndarray
    kl_hat: np.ndarray


def draw_response(X, beta, kind, rng):
    eta = X @ beta
    if kind == "linear_gaussian":
        return eta + rng.standard_normal(X.shape[0])
    return (rng.random(X.shape[0]) < expit(eta)).astype(float)


def run_replicate(config, replicate_index, scenario=None):
    """One full pipeline pass; deterministic given ``(config.seed, replicate_index)``."""
    scenario = scenario or prepare_scenario(config)
    try:
        rx, ry, rk, rs = (rng_for(config.seed, replicate_index, s) for s in range(4))
        X = scenario.model.sample(config.n, rx)
        Y = draw_response(X, scenario.truth.beta, config.response_kind, ry)
        Xt = sample_knockoffs(scenario.mechanism, X, rk)
        design = AugmentedDesign.from_pair(X, Xt)
        stat_seed = int(rs.integers(2**31))
        w = compute_w(config.statistic_kind, design, Y, config.lasso_lambda_fraction, stat_seed).w
        kl = observed_kl(
            X,
            Xt,
            GaussianConditionalEvaluator(scenario.model),
            GaussianConditionalEvaluator(scenario.theta_tilde),
        ).kl_hat
    except KnockoffError as exc:
        raise type(exc)(f"replicate {replicate_index}: {exc}") from exc
    return ReplicateRecord(int(replicate_index), w, kl)


def _run_chunk(config, scenario, indices):
    return [run_replicate(config, i, scenario) for i in indices]


def resolve_threads(threads=None):
    if threads is None:
        threads = int(os.environ.get("KNOCKOFF_THREADS", "1"))
    return max(1, int(threads))


def run_replicates(config, threads=None, scenario=None):
    """All replicates of ``config``, in index order regardless of scheduling."""
    scenario = scenario or prepare_scenario(config)
    threads = resolve_threads(threads)
    indices = np.arange(config.replicates)
    if threads == 1:
        return _run_chunk(config, scenario, indices)
    chunks = np.array_split(indices, min(threads * 4, len(indices)))
    parts = Parallel(n_jobs=threads)(delayed(_run_chunk)(config, scenario, c) for c in chunks)
    records = [r for part in parts for r in part]
    return sorted(records, key=lambda r: r.index)


# --- summaries ------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloReport:
    variant: str
    q: float
    empirical_fdr: Estimate
    empirical_power: Estimate
    modified_fdr: Estimate
    epsilon_grid: np.ndarray
    restricted_fdr_eps: list
    restricted_modified_fdr_eps: list
    bound_report: object
    null_positive_fraction: np.ndarray
    null_nonzero_counts: np.ndarray
    per_replicate: np.ndarray

    def to_dict(self):
        return {
            "variant": self.variant,
            "q": self.q,
            "empirical_fdr": self.empirical_fdr.to_dict(),
            "empirical_power": self.empirical_power.to_dict(),
            "modified_fdr": self.modified_fdr.to_dict(),
            "epsilon_grid": [float(e) for e in self.epsilon_grid],
            "restricted_fdr_eps": [e.to_dict() for e in self.restricted_fdr_eps],
            "restricted_modified_fdr_eps": [e.to_dict() for e in self.restricted_modified_fdr_eps],
            "bound_report": self.bound_report.to_dict(),
            "null_positive_fraction": [float(v) for v in self.null_positive_fraction],
            "null_nonzero_counts": [int(v) for v in self.null_nonzero_counts],
            "per_replicate": {
                "n_selected": self.per_replicate[:, 0].astype(int).tolist(),
                "n_false": self.per_replicate[:, 1].astype(int).tolist(),
                "max_null_kl": self.per_replicate[:, 2].tolist(),
            },
        }


def estimate_fdr_power(records, truth, q, epsilon_grid=None, variant=KNOCKOFF_PLUS, **bound_extra):
    """FDR, power and the restricted / modified FDR quantities over replicates.

    The restricted quantity at ``eps`` counts only selected nulls with
    ``KL_j <= eps``; its denominator is ``max(|S|, 1)`` and, for the
    modified form, ``|S| + 1/q``.  The inflation bound uses the empirical
    law of ``max_{j null} KL_j`` from the same replicates.
    """
    if not records:
        raise ValidationError("need at least one replicate record")
    eps = default_epsilon_grid() if epsilon_grid is None else np.asarray(epsilon_grid, dtype=float)
    variant = normalize_variant(variant)
    p = truth.beta.shape[0]
    null = truth.beta == 0
    n_nonnull = int((~null).sum())
    fdp, power, mod = [], [], []
    restricted = np.zeros((len(records), eps.size))
    restricted_mod = np.zeros((len(records), eps.size))
    per_rep = np.zeros((len(records), 3))
    pos = np.zeros(p)
    nonzero = np.zeros(p)
    max_null_kl = np.zeros(len(records))
    for r, rec in enumerate(records):
        sel = select(rec.w, q, variant).selected_mask(p)
        n_sel = int(sel.sum())
        false = sel & null
        n_false = int(false.sum())
        fdp.append(n_false / max(n_sel, 1))
        mod.append(n_false / (n_sel + 1 / q))
        power.append(int((sel & ~null).sum()) / n_nonnull if n_nonnull else 0.0)
        low_kl = (rec.kl_hat[false][:, None] <= eps[None, :]).sum(axis=0)
        restricted[r] = low_kl / max(n_sel, 1)
        restricted_mod[r] = low_kl / (n_sel + 1 / q)
        max_null_kl[r] = rec.kl_hat[null].max() if null.any() else -np.inf
        per_rep[r] = (n_sel, n_false, max_null_kl[r])
        pos += rec.w > 0
        nonzero += rec.w != 0
    exc, ci = exceedance_from_samples(max_null_kl, eps)
    bounds = inflation_bound(q, eps, exc, ci, **bound_extra)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(nonzero > 0, pos / nonzero, np.nan)
    return MonteCarloReport(
        variant=variant,
        q=float(q),
        empirical_fdr=mean_estimate(fdp),
        empirical_power=mean_estimate(power),
        modified_fdr=mean_estimate(mod),
        epsilon_grid=eps,
        restricted_fdr_eps=[mean_estimate(restricted[:, k]) for k in range(eps.size)],
        restricted_modified_fdr_eps=[mean_estimate(restricted_mod[:, k]) for k in range(eps.size)],
        bound_report=bounds,
        null_positive_fraction=frac[null],
        null_nonzero_counts=nonzero[null],
        per_replicate=per_rep,
    )


def simulate(config, threads=None, epsilon_grid=None):
    """Run every replicate of ``config`` and summarize; returns ``(scenario, records, report)``."""
    scenario = prepare_scenario(config)
    records = run_replicates(config, threads, scenario)
    extra = {"delta_theta": scenario.delta_theta}
    if 0 <= scenario.delta_theta < 1 and config.p >= 2 and config.n > 0:
        extra["lemma4_bound"] = float(lemma4_bound(config.n, config.p, scenario.delta_theta))
    report = estimate_fdr_power(records, scenario.truth, config.q, epsilon_grid, config.variant, **extra)
    return scenario, records, report


# --- KL concentration experiments ------------------------------------------


@dataclass(frozen=True)
class KlBoundExperiment:
    bound: float
    allowed_failure: float
    max_kl: np.ndarray
    exceed: Estimate
    event_holds: Estimate | None = None


def discrete_kl_experiment(n=100, p=10, delta=0.01, reps=2000, seed=0):
    """Independent binary features whose estimated conditionals have log-ratio bound ``delta``.

    ``P(x_j = 1) = pi_j`` and ``Q(x_j = 1) = expit(logit(pi_j) - delta)``,
    so every swap log ratio lies in ``[-delta, delta]``.  Knockoffs for a
    product law are independent draws from ``Q``, which is exactly what the
    sequential construction returns in that case.
    """
    probs = np.linspace(0.3, 0.7, p)
    q_probs = expit(logit(probs) - delta)
    p_eval = BernoulliProductEvaluator(probs)
    q_eval = BernoulliProductEvaluator(q_probs)
    max_kl = np.empty(reps)
    for r in range(reps):
        rng = rng_for(seed, r)
        X = (rng.random((n, p)) < probs).astype(float)
        Xt = (rng.random((n, p)) < q_probs).astype(float)
        max_kl[r] = observed_kl(X, Xt, p_eval, q_eval).max_kl
    bound = float(lemma2_bound(n, p, delta))
    return KlBoundExperiment(bound, 1 / p, max_kl, proportion(max_kl > bound))


def gaussian_kl_experiment(n=200, p=20, delta_th=0.02, reps=2000, seed=0, rho=0.5):
    """Gaussian features with a perturbed precision estimate at a given ``delta_theta``."""
    model = gen_ar1_precision(p, rho)
    tt = perturb_precision(model, delta_th, rng_for(seed, 1 << 30))
    mech = gaussian_mechanism(tt)
    p_eval = GaussianConditionalEvaluator(model)
    q_eval = GaussianConditionalEvaluator(tt)
    delta = gaussian_log_ratio_delta(delta_th, n, p)
    max_kl = np.empty(reps)
    holds = np.empty(reps, dtype=bool)
    for r in range(reps):
        rx, rk = rng_for(seed, r, 0), rng_for(seed, r, 1)
        X = model.sample(n, rx)
        Xt = sample_knockoffs(mech, X, rk)
        diag = observed_kl(X, Xt, p_eval, q_eval)
        max_kl[r] = diag.max_kl
        holds[r] = event_e_delta_check(diag.per_observation_terms, delta)
    bound = float(lemma4_bound(n, p, delta_th))
    return KlBoundExperiment(bound, 2 / p, max_kl, proportion(max_kl > bound), proportion(holds))
