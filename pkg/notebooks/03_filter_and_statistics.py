"""
Statistics and the knockoff filter
==================================

Lasso coefficient differences on [X, X_tilde], their flip-sign property,
and the knockoff / knockoff+ thresholds.
"""

import numpy as np

from robust_knockoffs import AugmentedDesign, check_flip_sign, gaussian_mechanism, lcd_stats, sample_knockoffs, select
from robust_knockoffs.filter import leave_one_out_thresholds
from robust_knockoffs.simulator import gen_ar1_precision

model = gen_ar1_precision(30, 0.5)
rng = np.random.default_rng(1)
X = model.sample(200, rng)
beta = np.zeros(30)
beta[::4] = 2.0
y = X @ beta + rng.standard_normal(200)

design = AugmentedDesign.from_pair(X, sample_knockoffs(gaussian_mechanism(model.as_estimate()), X, 2))
W = lcd_stats(design, y, seed=3).w
print("largest W:", np.argsort(-W)[:5], np.round(np.sort(W)[::-1][:5], 3))

# swapping a subset of pairs flips exactly those signs
print("flip-sign on {0, 5, 10}:", bool(check_flip_sign(lcd_stats, design, y, [0, 5, 10], seed=3)))

for variant in ("knockoff", "knockoff_plus"):
    res = select(W, 0.2, variant)
    print(variant, "threshold", res.threshold, "selected", sorted(res.selected))

# a worked example where the two variants differ
W_small = np.array([3.0, -1.0, 2.0, -2.0, 5.0])
print("knockoff :", select(W_small, 0.4, "knockoff"))
print("knockoff+:", select(W_small, 0.4, "knockoff+"))
print("leave-one-out thresholds:", leave_one_out_thresholds(W_small, 0.4, "knockoff"))
