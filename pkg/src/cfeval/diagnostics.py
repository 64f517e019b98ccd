"""Checks that logged propensity scores match how actions were really drawn."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .collector import ExplorationLog, as_log, sample_indices
from .core import Action, make_action
from .errors import DomainError, InsufficientDataError

TEST_NAMES = ("arithmetic", "harmonic", "replay")


@dataclass(frozen=True)
class DiagnosticReport:
    """Outcome of one consistency test.

    ``passed`` is ``|statistic - expected| <= deviation_bound``; for replay the
    statistic is the mismatch count and both expected value and bound are 0.
    """

    test_name: str
    target_action: Action | None
    statistic: float
    expected: float
    deviation_bound: float
    alpha: float
    passed: bool
    n: int
    mismatched_records: tuple[int, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        doc = {
            "test_name": self.test_name,
            "target_action": None if self.target_action is None else self.target_action.to_json(),
            "statistic": self.statistic,
            "expected": self.expected,
            "deviation_bound": self.deviation_bound,
            "alpha": self.alpha,
            "passed": self.passed,
            "n": self.n,
        }
        if self.test_name == "replay":
            doc["mismatched_records"] = list(self.mismatched_records)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def hoeffding_radius(n: int, alpha: float, value_range: float = 1.0) -> float:
    """Two-sided Hoeffding deviation for the mean of ``n`` bounded variables."""
    return value_range * math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def _target_index(target: Action | int) -> int:
    return target.index if isinstance(target, Action) else int(target)


def _target_probs(log: ExplorationLog, target: int) -> np.ndarray:
    if not log.has_pvec:
        raise InsufficientDataError("test needs logged propensity vectors")
    if not 0 <= target < log.pvec_table.shape[1]:
        raise DomainError(f"target action {target} outside the logged action space")
    return log.pvec_table[log.pvec_row, target]


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")


def arithmetic_mean_test(log, target: Action | int, alpha: float = 0.05) -> DiagnosticReport:
    """Observed frequency of ``target`` vs. the mean of its logged probabilities."""
    _check_alpha(alpha)
    log = as_log(log)
    t = _target_index(target)
    p = _target_probs(log, t)
    n = len(log)
    stat = float(np.mean(log.action == t))
    expected = float(np.mean(p))
    bound = hoeffding_radius(n, alpha)
    return DiagnosticReport(
        "arithmetic",
        make_action(log.mode, t),
        stat,
        expected,
        bound,
        alpha,
        abs(stat - expected) <= bound,
        n,
    )


def harmonic_terms(actions: np.ndarray, target: int, p: np.ndarray) -> np.ndarray:
    """``1[a = t] / p_t + 1[a != t] / (1 - p_t)``, which has mean 2 under clean logging."""
    hit = actions == target
    return np.where(hit, 1.0 / p, 1.0 / (1.0 - p))


def harmonic_mean_test(log, target: Action | int, alpha: float = 0.05) -> DiagnosticReport:
    """Mean of the harmonic test variable vs. its expectation 2.

    The Hoeffding band is widened by ``M = max(1/p_t, 1/(1 - p_t))`` over the
    log, the largest value any record's term can take.
    """
    _check_alpha(alpha)
    log = as_log(log)
    t = _target_index(target)
    p = _target_probs(log, t)
    if np.any((p <= 0) | (p >= 1)):
        raise DomainError("harmonic test needs 0 < p_target < 1 on every record")
    n = len(log)
    stat = float(np.mean(harmonic_terms(log.action, t, p)))
    m = float(np.max(np.maximum(1.0 / p, 1.0 / (1.0 - p))))
    bound = hoeffding_radius(n, alpha, m)
    return DiagnosticReport(
        "harmonic",
        make_action(log.mode, t),
        stat,
        2.0,
        bound,
        alpha,
        abs(stat - 2.0) <= bound,
        n,
    )


def replay_verify(log) -> DiagnosticReport:
    """Re-draw every action from its logged seed and vector.

    A record mismatches when the replayed action differs from the logged
    one, when its logged ``p`` differs from ``pvec[a]``, or when its vector
    is not a distribution.
    """
    log = as_log(log)
    if not log.has_seed:
        raise InsufficientDataError("replay needs logged seeds")
    if not log.has_pvec:
        raise InsufficientDataError("replay needs logged propensity vectors")
    table = log.pvec_table
    valid_rows = np.all(table > 0, axis=1) & (np.abs(table.sum(axis=1) - 1.0) <= 1e-9)
    bad = ~valid_rows[log.pvec_row]
    for lo in range(0, len(log), 1 << 15):
        hi = min(lo + (1 << 15), len(log))
        rows = log.pvec_row[lo:hi]
        replayed = sample_indices(table[rows], log.seed[lo:hi])
        bad[lo:hi] |= replayed != log.action[lo:hi]
    logged_p = table[log.pvec_row, np.minimum(log.action, table.shape[1] - 1)]
    bad |= log.action >= table.shape[1]
    bad |= ~np.isclose(log.propensity, logged_p, rtol=1e-12, atol=0.0)
    idx = np.flatnonzero(bad)
    return DiagnosticReport(
        "replay",
        None,
        float(idx.size),
        0.0,
        0.0,
        0.0,
        idx.size == 0,
        len(log),
        tuple(int(i) for i in idx),
    )


def sweep(log, alpha: float = 0.05) -> list[DiagnosticReport]:
    """Both mean tests on every action, each at the Bonferroni level ``alpha / K``.

    Actions with ``p_t`` of 1 somewhere in the log are skipped by the harmonic
    test (it is undefined there).
    """
    _check_alpha(alpha)
    log = as_log(log)
    if not log.has_pvec:
        raise InsufficientDataError("sweep needs logged propensity vectors")
    k = log.pvec_table.shape[1]
    a = alpha / k
    reports = []
    for t in range(k):
        reports.append(arithmetic_mean_test(log, t, a))
        p = log.pvec_table[:, t]
        if np.all((p > 0) & (p < 1)):
            reports.append(harmonic_mean_test(log, t, a))
    return reports
