"""One-pass moments and normal quantiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

Z_TABLE = {0.90: 1.645, 0.95: 1.96, 0.99: 2.576}


def z_value(level: float) -> float:
    """Two-sided normal quantile for a confidence ``level``.

    The three common levels use the customary rounded constants (1.96 for
    95%); anything else falls back to the exact normal quantile.
    """
    if not 0 < level < 1:
        raise ValueError(f"confidence level must be in (0, 1), got {level!r}")
    for known, z in Z_TABLE.items():
        if abs(level - known) < 1e-12:
            return z
    return NormalDist().inv_cdf(0.5 + level / 2)


@dataclass
class RunningMoments:
    """Streaming count/mean/sum of squared deviations.

    Batches are folded in with the pairwise update of Chan, Golub and
    LeVeque, so feeding a stream in any chunking gives the two-pass answer
    to rounding error.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, values) -> "RunningMoments":
        x = np.asarray(values, dtype=np.float64).ravel()
        if x.size == 0:
            return self
        bmean = float(x.mean())
        bm2 = float(np.square(x - bmean).sum())
        return self.merge(RunningMoments(int(x.size), bmean, bm2))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / n
        self.m2 += other.m2 + delta * delta * self.count * other.count / n
        self.count = n
        return self

    def variance(self, ddof: int = 1) -> float:
        if self.count - ddof <= 0:
            return math.nan
        return max(self.m2, 0.0) / (self.count - ddof)

    def std(self, ddof: int = 1) -> float:
        return math.sqrt(self.variance(ddof))
