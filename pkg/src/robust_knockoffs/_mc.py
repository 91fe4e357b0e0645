"""Small Monte Carlo summaries shared by the simulator and the adversary."""

from dataclasses import dataclass

import numpy as np

Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo mean with standard error and an interval."""

    mean: float
    se: float
    lo: float
    hi: float
    n: int

    def to_dict(self):
        return {"mean": self.mean, "se": self.se, "lo": self.lo, "hi": self.hi, "n": self.n}


def wilson_interval(k, n, z=Z95):
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    k = np.asarray(k, dtype=float)
    if n == 0:
        return np.zeros_like(k), np.ones_like(k)
    phat = k / n
    denom = 1 + z**2 / n
    centre = (phat + z**2 / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z**2 / (4 * n**2)) / denom
    return np.clip(centre - half, 0, 1), np.clip(centre + half, 0, 1)


def proportion(flags, z=Z95):
    flags = np.asarray(flags, dtype=bool)
    n = flags.size
    k = int(flags.sum())
    mean = k / n if n else 0.0
    se = float(np.sqrt(mean * (1 - mean) / n)) if n else 0.0
    lo, hi = wilson_interval(k, n, z)
    return Estimate(mean, se, float(lo), float(hi), n)


def mean_estimate(values, z=Z95):
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(values.mean()) if n else 0.0
    se = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return Estimate(mean, se, mean - z * se, mean + z * se, n)
