"""Online (Poisson-weight) bootstrap of the IPS estimate."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import IO

import numpy as np
from scipy import stats

from .estimator import ClipConfig, PolicyValueEstimate, ips_terms
from .policy import Policy

DEFAULT_B = 1000
DEFAULT_BINS = 30
RATIO_BAND = (0.85, 1.15)
SMALL_N = 1000


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    replicates: np.ndarray
    mean: float
    std: float
    skewness: float
    excess_kurtosis: float
    histogram: list[tuple[float, float, int]]
    n: int

    @property
    def B(self) -> int:
        return self.replicates.size

    def summary(self) -> dict:
        return {
            "B": self.B,
            "n": self.n,
            "mean": self.mean,
            "std": self.std,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def replicate_generator(seed: int, b: int) -> np.random.Generator:
    """Generator for replicate ``b``; independent of how replicates are scheduled."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(b,))))


def poisson_weights(n: int, seed: int, b: int) -> np.ndarray:
    return replicate_generator(seed, b).poisson(1.0, size=n)


def bootstrap_replicates(terms: np.ndarray, B: int, seed: int, replicates=None) -> np.ndarray:
    """Weighted means ``sum(w_i * t_i) / n`` for the requested replicate ids.

    Dividing by the raw record count (not the weight total) keeps every
    replicate on the same scale as the point estimate.
    """
    terms = np.asarray(terms, dtype=np.float64)
    n = terms.size
    ids = range(B) if replicates is None else replicates
    return np.array([poisson_weights(n, seed, b) @ terms / n for b in ids])


def histogram(replicates, bins: int = DEFAULT_BINS) -> list[tuple[float, float, int]]:
    """Equal-width bins over ``[min, max]``; right-open except the last.

    Identical values collapse into one zero-width bin.
    """
    x = np.asarray(replicates, dtype=np.float64)
    if x.size == 0:
        raise ValueError("no replicates")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return [(lo, hi, int(x.size))]
    edges = np.linspace(lo, hi, bins + 1)
    counts, edges = np.histogram(x, bins=edges)
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def online_bootstrap(
    log,
    policy: Policy,
    B: int = DEFAULT_B,
    seed: int = 0,
    *,
    clip: ClipConfig | None = None,
    bins: int = DEFAULT_BINS,
) -> BootstrapResult:
    """Poisson(1)-weighted bootstrap distribution of the IPS estimate.

    Each replicate draws an independent Poisson(1) weight for every record.
    Replicate ``b`` uses its own generator derived from ``(seed, b)``, so
    replicates can be computed in any order or in parallel.
    """
    if B < 2:
        raise ValueError("B must be >= 2")
    terms, _ = ips_terms(log, policy, clip)
    if terms.size == 0:
        raise ValueError("empty log")
    reps = bootstrap_replicates(terms, B, seed)
    return summarize(reps, bins, terms.size)


def summarize(reps: np.ndarray, bins: int = DEFAULT_BINS, n: int = 0) -> BootstrapResult:
    reps = np.asarray(reps, dtype=np.float64)
    sd = float(reps.std(ddof=1))
    if sd > 0:
        skew = float(stats.skew(reps))
        kurt = float(stats.kurtosis(reps, fisher=True))
    else:
        skew = kurt = 0.0
    return BootstrapResult(reps, float(reps.mean()), sd, skew, kurt, histogram(reps, bins), n)


@dataclass(frozen=True)
class ConsistencyRow:
    bootstrap_std: float
    analytic_stderr: float
    ratio: float
    flagged: bool
    small_sample: bool
    reason: str = ""


def bootstrap_vs_analytic(result: BootstrapResult, estimate: PolicyValueEstimate, small_n: int = SMALL_N) -> ConsistencyRow:
    """Compare the bootstrap spread with the analytic standard error.

    Flags ratios outside [0.85, 1.15].  Logs under ``small_n`` records are
    marked ``small_sample``; a flag there is expected and not an error.
    """
    bs, an = result.std, estimate.stderr
    small = estimate.n < small_n
    if an == 0:
        if bs == 0:
            return ConsistencyRow(bs, an, 1.0, False, small)
        return ConsistencyRow(bs, an, math.inf, True, small, "analytic stderr is 0 but bootstrap std is not")
    ratio = bs / an
    lo, hi = RATIO_BAND
    flagged = not lo <= ratio <= hi
    return ConsistencyRow(bs, an, ratio, flagged, small, "ratio outside band" if flagged else "")


def write_histogram_csv(fp: IO[str], hist: list[tuple[float, float, int]]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(("bin_low", "bin_high", "count"))
    for lo, hi, c in hist:
        w.writerow((repr(lo), repr(hi), c))
