import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_knockoffs import ValidationError, check_tj_property, knockoff_plus_threshold, knockoff_threshold, select
from robust_knockoffs.filter import leave_one_out_thresholds

W_EX = np.array([3.0, -1.0, 2.0, -2.0, 5.0])


def brute_threshold(W, q, offset):
    """Direct scan over candidate magnitudes, one ratio at a time."""
    for t in sorted({abs(w) for w in W if w != 0}):
        neg = sum(w <= -t for w in W)
        pos = sum(w >= t for w in W)
        num = offset + neg
        ratio = 0.0 if num == 0 and pos == 0 else (num / pos if pos else np.inf)
        if ratio <= q:
            return t
    return np.inf


def test_knockoff_example():
    res = knockoff_threshold(W_EX, 0.4)
    assert res.threshold == 2.0
    assert res.selected == frozenset({0, 2, 4})


def test_knockoff_all_positive():
    res = knockoff_threshold([1.5, 0.5, 2.0], 0.1)
    assert res.threshold == 0.5 and res.selected == frozenset({0, 1, 2})


def test_knockoff_all_negative():
    res = knockoff_threshold([-1.0, -2.0], 0.3)
    assert res.threshold == np.inf and res.selected == frozenset()


def test_knockoff_plus_example():
    # at t=1 the ratio is (1+1)/3; the smallest feasible magnitude is 3
    res = knockoff_plus_threshold([5.0, 4.0, 3.0, -1.0], 0.5)
    assert res.threshold == 3.0
    assert res.selected == frozenset({0, 1, 2})


def test_knockoff_plus_infeasible():
    res = knockoff_plus_threshold(W_EX, 0.4)
    assert res.threshold == np.inf and not res.selected


def test_knockoff_plus_single_positive():
    assert knockoff_plus_threshold([2.0], 0.5).threshold == np.inf


def test_zeros_never_selected():
    res = knockoff_threshold([0.0, 0.0, 1.0], 0.5)
    assert res.selected == frozenset({2})
    assert knockoff_threshold([0.0, 0.0], 0.5).threshold == np.inf


def test_invalid_inputs():
    with pytest.raises(ValidationError):
        select([1.0], 0.0)
    with pytest.raises(ValidationError):
        select([np.nan], 0.1)
    with pytest.raises(ValidationError):
        select([1.0], 0.1, "bh")


def test_variant_alias():
    assert select(W_EX, 0.4, "knockoff+").variant == "knockoff_plus"


def test_selected_mask():
    np.testing.assert_array_equal(knockoff_threshold(W_EX, 0.4).selected_mask(5), [1, 0, 1, 0, 1])


def test_loo_example():
    T = leave_one_out_thresholds(W_EX, 0.4, "knockoff")
    assert T[1] == 1.0


def test_loo_all_positive():
    W = np.array([1.0, 2.0, 3.0])
    T = leave_one_out_thresholds(W, 0.3, "knockoff")
    assert np.all(T == knockoff_threshold(W, 0.3).threshold)


def test_tj_property_example():
    for variant in ("knockoff", "knockoff_plus"):
        assert check_tj_property(W_EX, 0.4, variant)


def test_tj_property_single_negative_vacuous():
    assert check_tj_property([3.0, -1.0, 2.0], 0.2)


w_vectors = st.lists(st.integers(-4, 4), min_size=1, max_size=12).map(lambda v: np.array(v, dtype=float))
levels = st.sampled_from([0.05, 0.1, 0.2, 0.25, 0.3, 0.5, 0.7])
variants = st.sampled_from(["knockoff", "knockoff_plus"])


@given(W=w_vectors, q=levels, variant=variants)
def test_matches_brute_force(W, q, variant):
    t = select(W, q, variant).threshold
    assert t == brute_threshold(W, q, 1 if variant == "knockoff_plus" else 0)


@given(W=w_vectors, q=levels, variant=variants)
def test_threshold_membership(W, q, variant):
    res = select(W, q, variant)
    assert res.threshold == np.inf or res.threshold in set(np.abs(W[W != 0]))
    assert res.selected == frozenset(np.flatnonzero(W >= res.threshold).tolist())


@given(W=w_vectors, q=levels, variant=variants)
def test_monotone_in_q(W, q, variant):
    assert select(W, q, variant).selected <= select(W, min(0.99, q + 0.1), variant).selected


@given(W=w_vectors, q=levels)
def test_plus_subset_of_plain(W, q):
    assert knockoff_plus_threshold(W, q).selected <= knockoff_threshold(W, q).selected


@given(W=w_vectors, q=levels, variant=variants)
def test_tj_property(W, q, variant):
    assert check_tj_property(W, q, variant)


@given(W=w_vectors, q=levels, variant=variants)
def test_flipping_positive_leaves_threshold(W, q, variant):
    T = leave_one_out_thresholds(W, q, variant)
    base = select(W, q, variant).threshold
    assert np.all(T[W >= 0] == base)
