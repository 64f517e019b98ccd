"""Inverse-propensity value estimates, confidence intervals and comparisons."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from . import _rng
from .collector import RandomizationScheme, as_log, collect, distribution_table
from .core import EnvironmentSpec
from .errors import AlignmentError, DataIntegrityError, DomainError
from .policy import Policy
from .stats import RunningMoments, z_value

ESTIMATE_FIELDS = ("policy_id", "estimator", "point", "stderr", "ci_low", "ci_high", "n", "match_count")
COMPARISON_FIELDS = ("period", "online_value", "ips_value", "biased_value", "ci_width")


@dataclass(frozen=True)
class ClipConfig:
    """Propensity floor: ``max(p_min, p)`` replaces ``p`` in the weights."""

    p_min: float

    def __post_init__(self):
        if not 0 < self.p_min < 1:
            raise ValueError(f"p_min must be in (0, 1), got {self.p_min!r}")


@dataclass(frozen=True)
class PolicyValueEstimate:
    """Point estimate with a normal-approximation confidence interval.

    ``point`` is NaN for the matched-average estimator when no record
    matches the policy; check :attr:`defined` before using it.
    """

    point: float
    stderr: float
    ci_low: float
    ci_high: float
    n: int
    match_count: int
    level: float = 0.95
    estimator: str = "ips"

    @property
    def defined(self) -> bool:
        return not math.isnan(self.point)

    @property
    def ci_width(self) -> float:
        return self.ci_high - self.ci_low

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def as_row(self, policy_id: str) -> dict:
        return {
            "policy_id": policy_id,
            "estimator": self.estimator,
            "point": self.point,
            "stderr": self.stderr,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n": self.n,
            "match_count": self.match_count,
        }


def _interval(point: float, stderr: float, n: int, matches: int, level: float, name: str) -> PolicyValueEstimate:
    if math.isnan(point):
        return PolicyValueEstimate(point, math.nan, math.nan, math.nan, n, matches, level, name)
    half = z_value(level) * stderr
    return PolicyValueEstimate(point, stderr, point - half, point + half, n, matches, level, name)


def ips_terms(log, policy: Policy, clip: ClipConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-record terms ``r * 1[pi(x) = a] / max(p_min, p)`` and the match mask."""
    log = as_log(log)
    p = log.propensity
    if np.any(~(p > 0)):
        raise DataIntegrityError("log contains a propensity <= 0")
    match = log.policy_actions(policy) == log.action
    denom = p if clip is None else np.maximum(clip.p_min, p)
    terms = np.where(match, log.reward / denom, 0.0)
    return terms, match


def streaming_ips_estimate(
    chunks: Iterable, policy: Policy, clip: ClipConfig | None = None, level: float = 0.95
) -> PolicyValueEstimate:
    """IPS estimate over a stream of log chunks in a single pass."""
    z_value(level)
    acc = RunningMoments()
    matches = 0
    for chunk in chunks:
        terms, match = ips_terms(chunk, policy, clip)
        acc.update(terms)
        matches += int(match.sum())
    if acc.count == 0:
        raise ValueError("empty log")
    stderr = acc.std() / math.sqrt(acc.count) if acc.count > 1 else math.inf
    return _interval(acc.mean, stderr, acc.count, matches, level, "ips" if clip is None else "ips-clipped")


def ips_estimate(log, policy: Policy, clip: ClipConfig | None = None, level: float = 0.95) -> PolicyValueEstimate:
    """Unbiased offline value estimate of ``policy`` from exploration data.

    Parameters
    ----------
    log : ExplorationLog or iterable of ExplorationRecord
        Exploration data with strictly positive propensities.
    policy : Policy
        Deterministic target policy.
    clip : ClipConfig, optional
        Floor applied to propensities; trades a small bias for bounded weights.
    level : float
        Confidence level of the normal-approximation interval.

    Returns
    -------
    PolicyValueEstimate
        ``point`` is the mean of the per-record terms, ``stderr`` their sample
        standard deviation (n - 1 denominator) over ``sqrt(n)``.  A single
        record has an unbounded interval.
    """
    log = as_log(log)
    if len(log) == 0:
        raise ValueError("empty log")
    return streaming_ips_estimate([log], policy, clip, level)


def ips_difference(log, policy_a: Policy, policy_b: Policy, clip: ClipConfig | None = None, level: float = 0.95) -> PolicyValueEstimate:
    """Paired IPS estimate of ``V(policy_a) - V(policy_b)`` on one log."""
    ta, ma = ips_terms(log, policy_a, clip)
    tb, mb = ips_terms(log, policy_b, clip)
    if ta.size == 0:
        raise ValueError("empty log")
    acc = RunningMoments().update(ta - tb)
    stderr = acc.std() / math.sqrt(acc.count) if acc.count > 1 else math.inf
    return _interval(acc.mean, stderr, acc.count, int((ma | mb).sum()), level, "ips-difference")


def biased_estimate(log, policy: Policy, level: float = 0.95) -> PolicyValueEstimate:
    """Average reward over records where the log happens to agree with ``policy``.

    Ignores how likely each record was to be logged, so it is biased whenever
    exploration probabilities correlate with reward.  With no matching record
    the point is NaN.
    """
    log = as_log(log)
    if len(log) == 0:
        raise ValueError("empty log")
    match = log.policy_actions(policy) == log.action
    m = int(match.sum())
    if m == 0:
        return _interval(math.nan, math.nan, len(log), 0, level, "biased")
    acc = RunningMoments().update(log.reward[match])
    stderr = acc.std() / math.sqrt(m) if m > 1 else math.inf
    return _interval(acc.mean, stderr, len(log), m, level, "biased")


def ips_variance(policy: Policy, env: EnvironmentSpec, scheme: RandomizationScheme) -> float:
    """Exact per-record variance term ``E[r_pi(x)^2 (1/p_pi(x) - 1)]``.

    Divide by n for the variance of an n-record estimate.  Only defined for
    deterministic rewards (``env.noise == "fixed"``).
    """
    if env.noise != "fixed":
        raise DomainError("ips_variance needs deterministic rewards (noise='fixed')")
    table = distribution_table(scheme, env)
    rows = np.arange(env.n_contexts)
    acts = policy.action_indices(env.contexts)
    r = env.reward_means[rows, acts]
    p = table[rows, acts]
    return math.fsum((env.probs * r * r * (1.0 / p - 1.0)).tolist())


@dataclass(frozen=True)
class OnlineStats:
    """Result of running a policy live for one period."""

    period: int
    value: float
    stderr: float
    n: int


@dataclass(frozen=True)
class OfflineResult:
    """Offline estimates for one period."""

    period: int
    ips: PolicyValueEstimate
    biased: PolicyValueEstimate | None = None


@dataclass(frozen=True)
class ComparisonRow:
    period: int
    online_value: float
    ips_value: float
    biased_value: float
    ci_width: float
    ips_stderr: float

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in COMPARISON_FIELDS}


def simulate_online(env: EnvironmentSpec, policy: Policy, n: int, seed: int, period: int = 0) -> OnlineStats:
    """Roll ``policy`` out on ``env`` for ``n`` rounds (the A/B-test stand-in)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    acts = policy.action_indices(env.contexts)
    u_ctx = _rng.env_uniforms(seed, 0, n, _rng.LANE_CONTEXT)
    ctx = np.minimum(np.searchsorted(np.cumsum(env.probs), u_ctx, side="right"), env.n_contexts - 1)
    means = env.reward_means[ctx, acts[ctx]]
    if env.noise == "fixed":
        rewards = means
    else:
        rewards = (_rng.env_uniforms(seed, 0, n, _rng.LANE_REWARD) < means).astype(np.float64)
    acc = RunningMoments().update(rewards)
    stderr = acc.std() / math.sqrt(n) if n > 1 else math.inf
    return OnlineStats(period, acc.mean, stderr, n)


def compare(online: OnlineStats, offline: OfflineResult) -> ComparisonRow:
    """Pair the online ground truth with the offline estimates of one period."""
    if online.period != offline.period:
        raise AlignmentError(f"online period {online.period} != offline period {offline.period}")
    biased = offline.biased.point if offline.biased is not None else math.nan
    return ComparisonRow(
        offline.period,
        online.value,
        offline.ips.point,
        biased,
        offline.ips.ci_width,
        offline.ips.stderr,
    )


def daily_comparison(
    env: EnvironmentSpec,
    scheme: RandomizationScheme,
    policy: Policy,
    n_per_day: int,
    seed: int,
    days: int = 7,
    clip: ClipConfig | None = None,
    level: float = 0.95,
) -> list[ComparisonRow]:
    """Online-vs-offline rows, one per simulated day.

    Each day collects its own exploration log and, in parallel, runs
    ``policy`` online; both use seeds derived from ``seed`` and the day.
    """
    day_seeds = _rng.splitmix(seed, np.arange(1, 2 * days + 1, dtype=np.uint64))
    rows = []
    for d in range(days):
        log = collect(env, scheme, n_per_day, int(day_seeds[2 * d]))
        online = simulate_online(env, policy, n_per_day, int(day_seeds[2 * d + 1]), period=d)
        offline = OfflineResult(d, ips_estimate(log, policy, clip, level), biased_estimate(log, policy, level))
        rows.append(compare(online, offline))
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_estimates_csv(fp: IO[str], rows: Sequence[tuple[str, PolicyValueEstimate]]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(ESTIMATE_FIELDS)
    for policy_id, est in rows:
        r = est.as_row(policy_id)
        w.writerow([_fmt(r[k]) for k in ESTIMATE_FIELDS])


def write_comparison_csv(fp: IO[str], rows: Sequence[ComparisonRow]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(COMPARISON_FIELDS)
    for row in rows:
        r = row.as_row()
        w.writerow([_fmt(r[k]) for k in COMPARISON_FIELDS])


def read_estimates_csv(fp: IO[str]) -> list[tuple[str, PolicyValueEstimate]]:
    out = []
    for r in csv.DictReader(fp):
        est = PolicyValueEstimate(
            float(r["point"]),
            float(r["stderr"]),
            float(r["ci_low"]),
            float(r["ci_high"]),
            int(r["n"]),
            int(r["match_count"]),
            estimator=r["estimator"],
        )
        out.append((r["policy_id"], est))
    return out

