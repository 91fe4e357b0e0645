"""Knockoff and knockoff+ thresholds.

For a statistic vector ``W`` and level ``q`` the threshold is the smallest
``t`` among the nonzero magnitudes ``|W_j|`` with::

    (offset + #{j : W_j <= -t}) / #{j : W_j >= t}  <=  q

where ``offset`` is 0 for the knockoff filter and 1 for knockoff+, and
``0/0`` counts as 0.  When no ``t`` qualifies the threshold is ``inf`` and
nothing is selected.
"""

from dataclasses import dataclass

import numpy as np

from ._errors import ValidationError

KNOCKOFF = "knockoff"
KNOCKOFF_PLUS = "knockoff_plus"
_ALIASES = {"knockoff": KNOCKOFF, "knockoff+": KNOCKOFF_PLUS, "knockoff_plus": KNOCKOFF_PLUS}


@dataclass(frozen=True)
class SelectionResult:
    threshold: float
    selected: frozenset
    variant: str
    q: float

    def selected_mask(self, p):
        mask = np.zeros(p, dtype=bool)
        mask[list(self.selected)] = True
        return mask


def normalize_variant(variant):
    try:
        return _ALIASES[variant]
    except KeyError:
        raise ValidationError(f"unknown filter variant {variant!r}") from None


def _validate(W, q):
    W = np.asarray(W, dtype=float).ravel()
    if not np.all(np.isfinite(W)):
        raise ValidationError("W must be finite")
    if not 0 < q < 1:
        raise ValidationError(f"q must lie in (0, 1), got {q}")
    return W


def threshold_value(W, q, offset):
    """Scan the sorted nonzero magnitudes and return the first feasible one (or ``inf``)."""
    mags = np.abs(W)
    cand = np.unique(mags[mags > 0])
    if cand.size == 0:
        return np.inf
    # counts for every candidate at once via sorted positives / negatives
    pos = np.sort(W[W > 0])
    neg = np.sort(-W[W < 0])
    n_pos = pos.size - np.searchsorted(pos, cand, side="left")
    n_neg = neg.size - np.searchsorted(neg, cand, side="left")
    num = offset + n_neg
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(n_pos > 0, num / np.maximum(n_pos, 1), np.where(num == 0, 0.0, np.inf))
    ok = np.flatnonzero(ratio <= q)
    return float(cand[ok[0]]) if ok.size else np.inf


def select(W, q, variant=KNOCKOFF_PLUS):
    variant = normalize_variant(variant)
    W = _validate(W, q)
    t = threshold_value(W, q, 1 if variant == KNOCKOFF_PLUS else 0)
    selected = frozenset(np.flatnonzero(W >= t).tolist()) if np.isfinite(t) else frozenset()
    return SelectionResult(t, selected, variant, float(q))


def knockoff_threshold(W, q):
    return select(W, q, KNOCKOFF)


def knockoff_plus_threshold(W, q):
    return select(W, q, KNOCKOFF_PLUS)


def leave_one_out_thresholds(W, q, variant=KNOCKOFF_PLUS):
    """Thresholds ``T_j`` obtained after replacing ``W_j`` by ``|W_j|``."""
    variant = normalize_variant(variant)
    W = _validate(W, q)
    offset = 1 if variant == KNOCKOFF_PLUS else 0
    out = np.empty(W.size)
    for j in range(W.size):
        wj = W.copy()
        wj[j] = abs(wj[j])
        out[j] = threshold_value(wj, q, offset)
    return out


@dataclass(frozen=True)
class ThresholdPropertyCheck:
    ok: bool
    pair: tuple | None = None

    def __bool__(self):
        return self.ok


def check_tj_property(W, q, variant=KNOCKOFF_PLUS):
    """If ``W_j, W_k <= -min(T_j, T_k)`` then ``T_j == T_k``, for every pair.

    Returns a falsy result carrying the first counterexample pair.
    """
    W = np.asarray(W, dtype=float).ravel()
    T = leave_one_out_thresholds(W, q, variant)
    m = np.minimum.outer(T, T)
    hyp = (W[:, None] <= -m) & (W[None, :] <= -m)
    bad = np.argwhere(hyp & (T[:, None] != T[None, :]))
    if bad.size:
        return ThresholdPropertyCheck(False, (int(bad[0, 0]), int(bad[0, 1])))
    return ThresholdPropertyCheck(True)
