import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_knockoffs import NumericalError, PrecisionEstimate, ValidationError
from robust_knockoffs.diagnostics import (
    BernoulliProductEvaluator,
    GaussianConditionalEvaluator,
    TableConditionalEvaluator,
    default_epsilon_grid,
    delta_theta,
    event_e_delta_check,
    exceedance_from_samples,
    gaussian_conditional_evaluator,
    gaussian_kl_terms,
    gaussian_log_ratio_delta,
    inflation_bound,
    lemma2_bound,
    lemma4_bound,
    lemma4_leading_term,
    observed_kl,
    realized_delta,
)
from robust_knockoffs.discrete import random_joint
from robust_knockoffs.gaussian import gaussian_mechanism, sample_knockoffs
from robust_knockoffs.simulator import gen_ar1_precision, gaussian_kl_experiment, perturb_precision


def _gaussian_pair(seed, p=4, n=30, delta=0.1):
    model = gen_ar1_precision(p, 0.5)
    tt = perturb_precision(model, delta, seed)
    rng = np.random.default_rng(seed)
    X = model.sample(n, rng)
    Xt = sample_knockoffs(gaussian_mechanism(tt), X, rng)
    return model, tt, X, Xt


def test_equal_laws_give_exact_zero(rng):
    model, _, X, Xt = _gaussian_pair(1)
    ev = GaussianConditionalEvaluator(model)
    diag = observed_kl(X, Xt, ev, ev)
    assert np.all(diag.kl_hat == 0) and diag.max_kl == 0


def test_single_observation_value():
    P = GaussianConditionalEvaluator(np.eye(2))
    Q = GaussianConditionalEvaluator(np.diag([2.0, 1.0]))
    diag = observed_kl(np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]]), P, Q)
    assert abs(diag.kl_hat[0] - 0.5) <= 1e-12


def test_swap_negates_exactly():
    model, tt, X, Xt = _gaussian_pair(2)
    P, Q = GaussianConditionalEvaluator(model), GaussianConditionalEvaluator(tt)
    j = 1
    Xs, Xts = X.copy(), Xt.copy()
    Xs[:, j], Xts[:, j] = Xt[:, j], X[:, j]
    a = observed_kl(X, Xt, P, Q, features=[j]).kl_hat[j]
    b = observed_kl(Xs, Xts, P, Q, features=[j]).kl_hat[j]
    # the swap changes x_{-j} only in column j, which the j-th conditional ignores
    assert a == -b


def test_exchanging_p_and_q_negates():
    model, tt, X, Xt = _gaussian_pair(3)
    P, Q = GaussianConditionalEvaluator(model), GaussianConditionalEvaluator(tt)
    np.testing.assert_array_equal(observed_kl(X, Xt, P, Q).kl_hat, -observed_kl(X, Xt, Q, P).kl_hat)


def test_column_sums_and_signed():
    model, tt, X, Xt = _gaussian_pair(4)
    diag = observed_kl(X, Xt, GaussianConditionalEvaluator(model), GaussianConditionalEvaluator(tt))
    np.testing.assert_allclose(diag.per_observation_terms.sum(0), diag.kl_hat, rtol=0, atol=0)
    w = np.array([1.0, -2.0, 0.0, 3.0])
    np.testing.assert_array_equal(diag.signed(w), np.sign(w) * diag.kl_hat)


def test_non_finite_reports_location():
    P = BernoulliProductEvaluator([0.5, 0.5])

    def broken(j, values, X):
        out = np.zeros(len(values))
        if j == 1:
            out[2] = np.inf
        return out

    X = np.zeros((4, 2))
    with pytest.raises(NumericalError, match="observation 2, feature 1"):
        observed_kl(X, X, P, broken)


def test_shape_mismatch():
    ev = BernoulliProductEvaluator([0.5])
    with pytest.raises(ValidationError):
        observed_kl(np.zeros((3, 1)), np.zeros((2, 1)), ev, ev)


def test_identity_evaluator_is_standard_normal(rng):
    ev = gaussian_conditional_evaluator(np.eye(3))
    X = rng.standard_normal((5, 3))
    v = rng.standard_normal(5)
    np.testing.assert_allclose(ev(1, v, X), -v**2 / 2 - 0.5 * np.log(2 * np.pi))


def test_evaluator_hand_value():
    ev = gaussian_conditional_evaluator(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    val = ev(1, np.array([1.0]), np.array([[1.0, 1.0]]))[0]
    assert val == pytest.approx(-0.25 - 0.5 * np.log(np.pi), abs=1e-12)
    assert val == pytest.approx(-0.8224, abs=1e-4)


@given(seed=st.integers(0, 2**31 - 1), p=st.integers(2, 6))
def test_matches_closed_form_gaussian_terms(seed, p):
    model = gen_ar1_precision(p, 0.3)
    tt = perturb_precision(model, 0.2, seed)
    rng = np.random.default_rng(seed)
    X = model.sample(20, rng)
    Xt = sample_knockoffs(gaussian_mechanism(tt), X, rng)
    terms = observed_kl(X, Xt, GaussianConditionalEvaluator(model), GaussianConditionalEvaluator(tt)).per_observation_terms
    np.testing.assert_allclose(terms, gaussian_kl_terms(X, Xt, model, tt), atol=1e-9)


def test_bernoulli_and_table_evaluators_agree(rng):
    probs = np.array([0.3, 0.6])
    joint = np.multiply.outer([0.7, 0.3], [0.4, 0.6])
    a, b = BernoulliProductEvaluator(probs), TableConditionalEvaluator(joint)
    X = (rng.random((10, 2)) < probs).astype(float)
    for j in range(2):
        np.testing.assert_allclose(a(j, X[:, j], X), b(j, X[:, j], X), atol=1e-15)
    with pytest.raises(ValidationError):
        BernoulliProductEvaluator([0.0, 0.5])


def test_table_evaluator_on_random_joint(rng):
    joint = random_joint((3, 2), rng)
    ev = TableConditionalEvaluator(joint)
    X = np.array([[2, 1], [0, 0]])
    expected = joint.pmf[2, 1] / joint.pmf[:, 1].sum()
    assert np.exp(ev(0, X[:, 0], X))[0] == pytest.approx(expected)


def test_delta_theta_zero():
    theta = gen_ar1_precision(4, 0.5)
    assert delta_theta(theta, theta.as_estimate()) == 0


def test_delta_theta_identity_example():
    e = np.zeros((2, 2))
    e[0, 1] = e[1, 0] = 0.1
    assert delta_theta(np.eye(2), PrecisionEstimate(np.eye(2) + e)) == pytest.approx(0.1, abs=1e-12)


def test_delta_theta_scaled_example():
    e = np.zeros((2, 2))
    e[0, 1] = e[1, 0] = 0.4
    assert delta_theta(4 * np.eye(2), PrecisionEstimate(4 * np.eye(2) + e)) == pytest.approx(0.1, abs=1e-12)


def test_discrete_bound_values():
    assert lemma2_bound(100, 10, 0.0) == 0
    assert lemma2_bound(100, 10, 0.01) == pytest.approx(0.005 + 0.02 * np.sqrt(100 * np.log(10)), abs=1e-12)
    assert lemma2_bound(100, 10, 0.01) == pytest.approx(0.3085, abs=1e-4)
    assert lemma2_bound(100, 10, 0.02) > 2 * lemma2_bound(100, 10, 0.01)
    with pytest.raises(ValidationError):
        lemma2_bound(10, 1, 0.1)


def test_gaussian_explicit_delta():
    n, p, d = 200, 20, 0.02
    r = d / (1 - d)
    expected = 2 * np.sqrt(r**2 + r**4) * (1 + 2 * np.sqrt(np.log(n * p) / n))
    assert gaussian_log_ratio_delta(d, n, p) == pytest.approx(expected, rel=1e-14)
    assert lemma4_bound(n, p, d) == pytest.approx(lemma2_bound(n, p, expected), rel=1e-14)
    with pytest.raises(ValidationError):
        gaussian_log_ratio_delta(1.0, n, p)


def test_gaussian_leading_term_is_the_limit():
    # for small delta_theta and large n the explicit bound approaches the leading term
    ratio = lemma4_bound(10**6, 20, 1e-6) / lemma4_leading_term(10**6, 20, 1e-6)
    assert ratio == pytest.approx(1, abs=0.01)


def test_event_check_boundaries():
    assert event_e_delta_check(np.zeros((5, 3)), 0.0)
    delta, n = 0.3, 4
    t = np.zeros((n, 2))
    t[0, 1] = delta * np.sqrt(n) + 1e-9
    assert not event_e_delta_check(t, delta)
    t[0, 1] = delta * np.sqrt(n) * (1 - 1e-12)
    assert event_e_delta_check(t, delta)
    assert event_e_delta_check(t, realized_delta(t))


def test_event_holds_in_gaussian_scenario():
    p = 10
    exp = gaussian_kl_experiment(n=100, p=p, delta_th=0.05, reps=300, seed=5)
    ev = exp.event_holds
    assert ev.mean >= 1 - 1 / p - 3 * max(ev.se, np.sqrt((1 / p) * (1 - 1 / p) / ev.n))


def test_inflation_bound_exact_recovery():
    rep = inflation_bound(0.1, [0.0], [0.0])
    assert rep.best_bound == pytest.approx(0.1) and rep.best_epsilon == 0


def test_inflation_bound_arithmetic():
    rep = inflation_bound(0.1, [0.1], [0.01])
    assert rep.best_bound == pytest.approx(0.1 * np.exp(0.1) + 0.01)
    assert rep.best_bound == pytest.approx(0.1205, abs=1e-4)


def test_inflation_bound_vacuous():
    grid = default_epsilon_grid()
    rep = inflation_bound(0.2, grid, np.ones_like(grid))
    assert rep.best_bound >= 1.2 and rep.vacuous
    assert rep.to_dict()["vacuous"] is True


def test_inflation_bound_validation():
    with pytest.raises(ValidationError):
        inflation_bound(0.1, [0.0, 1.0], [0.5])
    with pytest.raises(ValidationError):
        inflation_bound(0.1, [0.0], [1.5])


def test_default_grid():
    g = default_epsilon_grid()
    assert g.size == 51 and g[0] == 0 and g[1] == pytest.approx(1e-3) and g[-1] == pytest.approx(5)


@given(
    q=st.floats(0.01, 0.5),
    samples=st.lists(st.floats(-5, 10), min_size=1, max_size=50),
)
def test_bound_at_least_q_and_min(q, samples):
    grid = default_epsilon_grid()
    exc, (lo, hi) = exceedance_from_samples(samples, grid)
    rep = inflation_bound(q, grid, exc, (lo, hi))
    assert np.all(rep.inflation_bound >= q)
    assert rep.best_bound == rep.inflation_bound.min()
    assert np.all(np.diff(exc) <= 0)
    assert np.all(lo <= exc + 1e-12) and np.all(exc <= hi + 1e-12)
