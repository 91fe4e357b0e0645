"""Exact knockoff constructions on small finite alphabets.

Everything here works on full probability tables, no sampling, so it can
serve as an independent check on the Gaussian sampler: exchangeability
and the likelihood-ratio identity are verified by enumeration.

Tables are numpy arrays with one axis per coordinate.  A joint law of
``(X, X_tilde)`` has ``2p`` axes, originals first.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._errors import NumericalError, ValidationError

MAX_P = 4
MAX_ALPHABET = 5
PMF_ATOL = 1e-12


def _check_pmf(pmf):
    if np.any(pmf < 0):
        raise ValidationError("pmf has negative entries")
    if abs(pmf.sum() - 1) > PMF_ATOL:
        raise ValidationError(f"pmf sums to {pmf.sum()!r}, not 1")


@dataclass(frozen=True)
class DiscreteJoint:
    """Joint pmf of ``p`` discrete features, one array axis per feature."""

    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=float)
        _check_pmf(pmf)
        if pmf.ndim > MAX_P or max(pmf.shape, default=0) > MAX_ALPHABET:
            raise ValidationError(
                f"enumeration capped at p <= {MAX_P} and alphabets <= {MAX_ALPHABET}, got {pmf.shape}"
            )
        object.__setattr__(self, "pmf", pmf)

    @property
    def p(self):
        return self.pmf.ndim

    @property
    def support_sizes(self):
        return self.pmf.shape


@dataclass(frozen=True)
class DiscreteConditional:
    """Conditional pmf of ``x_j`` given ``x_{-j}``.

    ``table`` has the shape of the joint; slicing along axis ``j`` at fixed
    ``x_{-j}`` gives a probability vector.
    """

    j: int
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        sums = table.sum(axis=self.j)
        if np.any(table < 0) or np.max(np.abs(sums - 1)) > PMF_ATOL:
            raise ValidationError("each conditional row must be a probability vector")
        object.__setattr__(self, "table", table)

    def prob(self, value, x_minus_j):
        idx = list(x_minus_j)
        idx.insert(self.j, value)
        return float(self.table[tuple(idx)])


@dataclass(frozen=True)
class KnockoffJoint:
    """Joint pmf of ``(X, X_tilde)`` with ``2p`` axes."""

    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=float)
        _check_pmf(pmf)
        if pmf.ndim % 2 or pmf.shape[: pmf.ndim // 2] != pmf.shape[pmf.ndim // 2 :]:
            raise ValidationError(f"knockoff pmf must have shape sizes + sizes, got {pmf.shape}")
        object.__setattr__(self, "pmf", pmf)

    @property
    def p(self):
        return self.pmf.ndim // 2

    def feature_marginal(self):
        return DiscreteJoint(self.pmf.sum(axis=tuple(range(self.p, 2 * self.p))))

    def kernel(self):
        """Conditional pmf of ``X_tilde`` given ``X`` (zero where ``X`` has no mass)."""
        p = self.p
        marg = self.pmf.sum(axis=tuple(range(p, 2 * p)), keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(marg > 0, self.pmf / marg, 0.0)


def conditional_table(joint, j):
    """``P(x_j | x_{-j})`` of a joint; rows with zero mass are set to uniform."""
    pmf = joint.pmf if isinstance(joint, DiscreteJoint) else np.asarray(joint, dtype=float)
    marg = pmf.sum(axis=j, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        table = np.where(marg > 0, pmf / marg, 1.0 / pmf.shape[j])
    return DiscreteConditional(j, table)


def replace_conditional(joint, cond):
    """Joint law with the marginal of ``x_{-j}`` from ``joint`` and ``x_j | x_{-j}`` from ``cond``."""
    rest = joint.pmf.sum(axis=cond.j, keepdims=True)
    return DiscreteJoint(rest * cond.table)


def scip_knockoffs(joint):
    """Sequential conditional independent pairs, computed as an exact pmf.

    For ``j = 1..p`` the knockoff ``x_tilde_j`` is drawn from the law of
    ``x_j`` given ``(x_{-j}, x_tilde_{1:j-1})`` under the joint built so far.
    Branches whose conditioning event has zero mass carry no probability
    and are skipped.
    """
    if not isinstance(joint, DiscreteJoint):
        joint = DiscreteJoint(joint)
    p = joint.p
    cur = joint.pmf
    for j in range(p):
        marg = cur.sum(axis=j, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(marg > 0, cur / marg, 0.0)
        # value axis of x_j becomes the new trailing x_tilde_j axis
        cond = np.expand_dims(np.moveaxis(cond, j, -1), j)
        cur = cur[..., None] * cond
    return KnockoffJoint(cur)


def swap_axes_perm(p, subset):
    perm = list(range(2 * p))
    for j in subset:
        perm[j], perm[p + j] = p + j, j
    return perm


def check_exchangeability(kj, subset):
    """Max absolute difference between the pmf and its swap over ``subset``."""
    subset = sorted(set(int(j) for j in subset))
    if any(j < 0 or j >= kj.p for j in subset):
        raise ValidationError(f"subset {subset} out of range for p={kj.p}")
    swapped = np.transpose(kj.pmf, swap_axes_perm(kj.p, subset))
    return float(np.max(np.abs(kj.pmf - swapped)))


def all_subsets(p):
    for r in range(p + 1):
        yield from combinations(range(p), r)


def mechanism_joint(kj, p_joint):
    """pmf of ``(X, X_tilde)`` when ``X ~ p_joint`` and ``X_tilde | X`` follows the kernel of ``kj``."""
    pmf = p_joint.pmf if isinstance(p_joint, DiscreteJoint) else np.asarray(p_joint, dtype=float)
    return pmf[(...,) + (None,) * kj.p] * kj.kernel()


def likelihood_ratio_check(kj, p_joint, j, a, b, x_minus_j, xt_minus_j, p_cond=None, q_cond=None):
    """Compare the swap likelihood ratio with its closed form.

    ``kj`` is the knockoff joint produced under the estimated law (whose
    ``j``-th conditional is ``Q_j``); its kernel is applied to data drawn
    from ``p_joint``.  Returns ``(lhs, rhs)`` where::

        lhs = P(X_j=a, Xt_j=b | rest) / P(X_j=b, Xt_j=a | rest)
        rhs = P_j(a) Q_j(b) / (Q_j(a) P_j(b))

    Raises
    ------
    NumericalError
        When the swapped configuration has zero mass (unidentifiable).
    """
    if not isinstance(p_joint, DiscreteJoint):
        p_joint = DiscreteJoint(p_joint)
    p_cond = p_cond or conditional_table(p_joint, j)
    q_cond = q_cond or conditional_table(kj.feature_marginal(), j)
    true_pmf = mechanism_joint(kj, p_joint)

    def idx(xj, xtj):
        x = list(x_minus_j)
        x.insert(j, xj)
        xt = list(xt_minus_j)
        xt.insert(j, xtj)
        return tuple(x) + tuple(xt)

    num = true_pmf[idx(a, b)]
    den = true_pmf[idx(b, a)]
    qa, pb = q_cond.prob(a, x_minus_j), p_cond.prob(b, x_minus_j)
    if den <= 0 or qa <= 0 or pb <= 0:
        raise NumericalError(f"unidentifiable configuration at j={j}, a={a}, b={b}")
    lhs = num / den
    rhs = p_cond.prob(a, x_minus_j) * q_cond.prob(b, x_minus_j) / (qa * pb)
    return float(lhs), float(rhs)


def random_joint(sizes, rng, concentration=1.0):
    """Strictly positive random pmf (Dirichlet mixed with uniform) over the given alphabet sizes."""
    rng = np.random.default_rng(rng)
    sizes = tuple(int(s) for s in sizes)
    m = int(np.prod(sizes))
    # mixing with the uniform law keeps every cell away from 0
    flat = 0.9 * rng.dirichlet(np.full(m, concentration)) + 0.1 / m
    return DiscreteJoint((flat / flat.sum()).reshape(sizes))


def likelihood_ratio_table(kj, p_joint, j):
    """Vectorized :func:`likelihood_ratio_check` over every configuration.

    Returns ``(lhs, rhs)`` arrays with the ``2p``-axis layout of the joint;
    ``lhs`` is NaN where the swapped configuration has no mass.
    """
    p = kj.p
    sizes = kj.pmf.shape[:p]
    true_pmf = mechanism_joint(kj, p_joint)
    swapped = np.transpose(true_pmf, swap_axes_perm(p, [j]))
    with np.errstate(invalid="ignore", divide="ignore"):
        lhs = np.where(swapped > 0, true_pmf / swapped, np.nan)
    r = conditional_table(p_joint, j).table / conditional_table(kj.feature_marginal(), j).table
    at_x = r[(...,) + (None,) * p]
    shape = [s if k != j else 1 for k, s in enumerate(sizes)] + [1] * p
    shape[p + j] = sizes[j]
    at_xt = (1.0 / np.moveaxis(r, j, -1)).reshape(shape)
    return lhs, np.broadcast_to(at_x * at_xt, lhs.shape)


def run_oracle_suite(n_instances=100, seed=0, max_p=3):
    """Fuzz SCIP exchangeability and the likelihood-ratio identity.

    Each instance draws a true law ``P`` and an estimate ``Q`` on the same
    alphabets, builds SCIP knockoffs from ``Q`` and checks every subset
    swap and every positive-mass configuration for every ``j``.
    """
    rng = np.random.default_rng(seed)
    max_swap_dev = 0.0
    max_lr_err = 0.0
    n_configs = 0
    for _ in range(n_instances):
        p = int(rng.integers(1, max_p + 1))
        sizes = tuple(int(s) for s in rng.integers(2, 4, size=p))
        p_joint = random_joint(sizes, rng)
        kj = scip_knockoffs(random_joint(sizes, rng))
        for subset in all_subsets(p):
            max_swap_dev = max(max_swap_dev, check_exchangeability(kj, subset))
        for j in range(p):
            lhs, rhs = likelihood_ratio_table(kj, p_joint, j)
            ok = np.isfinite(lhs)
            n_configs += int(ok.sum())
            max_lr_err = max(max_lr_err, float(np.max(np.abs(lhs[ok] - rhs[ok]), initial=0.0)))
    return {
        "instances": n_instances,
        "configurations": n_configs,
        "max_swap_deviation": max_swap_dev,
        "max_likelihood_ratio_error": max_lr_err,
        "swap_pass": max_swap_dev <= 1e-12,
        "likelihood_ratio_pass": max_lr_err <= 1e-10,
    }
