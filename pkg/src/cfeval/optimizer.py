"""Offline policy selection: maximize the IPS estimate over a parameter grid."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import IO, Callable, Sequence

import numpy as np

from .collector import ExplorationLog, as_log
from .core import EnvironmentSpec, subset_sizes, true_value
from .estimator import ClipConfig, PolicyValueEstimate, ips_difference, ips_estimate
from .policy import LinearArgmaxPolicy, Policy, ScoreThresholdPolicy

DEFAULT_TRAIN_FRACTION = 2 / 3


@dataclass(frozen=True)
class PolicyFamily:
    """A finite grid of parameter vectors and how to turn one into a policy.

    ``capacity`` bounds the expected number of selected candidates per
    impression; ``None`` means unconstrained.
    """

    family_id: str
    grid: tuple[tuple, ...]
    make: Callable[[tuple], Policy] = field(compare=False, repr=False)
    capacity: float | None = None

    def __post_init__(self):
        if not self.grid:
            raise ValueError("parameter grid is empty")
        object.__setattr__(self, "grid", tuple(tuple(p) for p in self.grid))

    def policies(self) -> list[Policy]:
        return [self.make(p) for p in self.grid]


def threshold_family(taus: Sequence[float], capacity: float | None = None) -> PolicyFamily:
    return PolicyFamily(
        "score-threshold",
        tuple((float(t),) for t in taus),
        lambda p: ScoreThresholdPolicy(p[0]),
        capacity,
    )


def linear_family(weight_grid: Sequence, mode: str = "atomic", capacity: float | None = None) -> PolicyFamily:
    """Grid of linear-argmax policies from ``(weights, bias)`` pairs.

    Pairs are stored as nested tuples so grid points stay orderable.
    """
    grid = []
    for w, b in weight_grid:
        w = np.asarray(w, dtype=np.float64)
        grid.append((tuple(map(tuple, w.tolist())), tuple(np.asarray(b, dtype=np.float64).tolist())))
    return PolicyFamily(
        "linear-argmax",
        tuple(grid),
        lambda p: LinearArgmaxPolicy(p[0], p[1], mode=mode),
        capacity,
    )


def split(log, train_fraction: float = DEFAULT_TRAIN_FRACTION, seed: int = 0) -> tuple[ExplorationLog, ExplorationLog]:
    """Random train/eval partition; ``round(train_fraction * n)`` records go to train."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    log = as_log(log)
    n = len(log)
    n_train = math.floor(train_fraction * n + 0.5)
    if n_train == 0 or n_train == n:
        raise ValueError(f"fraction {train_fraction} of {n} records leaves one side empty")
    perm = np.random.default_rng(seed).permutation(n)
    return log.take(np.sort(perm[:n_train])), log.take(np.sort(perm[n_train:]))


def empirical_capacity(policy: Policy, log: ExplorationLog) -> float:
    """Average number of candidates ``policy`` would send over the log's contexts."""
    acts = log.policy_actions(policy)
    if policy.mode != "subset":
        return 1.0
    sizes = subset_sizes(log.contexts[0].size)
    return float(sizes[acts].mean())


@dataclass(frozen=True)
class CandidateRow:
    params: tuple
    policy: Policy
    train_estimate: PolicyValueEstimate
    capacity: float
    feasible: bool
    eval_estimate: PolicyValueEstimate | None = None


@dataclass(frozen=True)
class OptimizationReport:
    family_id: str
    rows: tuple[CandidateRow, ...]
    selected: tuple | None
    selection_rule: str

    @property
    def selected_row(self) -> CandidateRow | None:
        for r in self.rows:
            if r.params == self.selected:
                return r
        return None

    def to_dict(self) -> dict:
        return {
            "family": self.family_id,
            "selected": None if self.selected is None else list(self.selected),
            "selection_rule": self.selection_rule,
            "rows": [
                {
                    "params": list(r.params),
                    "train_estimate": r.train_estimate.point,
                    "train_stderr": r.train_estimate.stderr,
                    "eval_estimate": None if r.eval_estimate is None else r.eval_estimate.point,
                    "capacity": r.capacity,
                    "feasible": r.feasible,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def write_csv(self, fp: IO[str]) -> None:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(("params", "train_estimate", "train_stderr", "eval_estimate", "capacity", "feasible", "selected"))
        for r in self.rows:
            w.writerow((
                json.dumps(list(r.params)),
                repr(r.train_estimate.point),
                repr(r.train_estimate.stderr),
                "" if r.eval_estimate is None else repr(r.eval_estimate.point),
                repr(r.capacity),
                int(r.feasible),
                int(r.params == self.selected),
            ))


def grid_select(
    family: PolicyFamily,
    train,
    clip: ClipConfig | None = None,
    level: float = 0.95,
) -> OptimizationReport:
    """Evaluate every grid point on ``train`` and pick the best feasible one.

    Ties in the train estimate go to the lower capacity, then to the
    lexicographically smaller parameter vector.  When nothing is feasible
    the report's ``selected`` is ``None``.
    """
    train = as_log(train)
    if len(train) == 0:
        raise ValueError("training log is empty")
    rows = []
    for params in family.grid:
        pol = family.make(params)
        est = ips_estimate(train, pol, clip, level)
        cap = empirical_capacity(pol, train)
        feasible = family.capacity is None or cap <= family.capacity
        rows.append(CandidateRow(params, pol, est, cap, feasible))
    feasible = [r for r in rows if r.feasible]
    if not feasible:
        return OptimizationReport(family.family_id, tuple(rows), None, "no feasible candidate")
    best = min(feasible, key=lambda r: (-r.train_estimate.point, r.capacity, r.params))
    rule = "max train IPS estimate"
    if family.capacity is not None:
        rule += f" subject to capacity <= {family.capacity}"
    return OptimizationReport(family.family_id, tuple(rows), best.params, rule)


@dataclass(frozen=True)
class ValidationRow:
    params: tuple
    eval_estimate: PolicyValueEstimate
    true_value: float
    covered: bool


def validate_selection(
    report: OptimizationReport,
    eval_log,
    env: EnvironmentSpec,
    clip: ClipConfig | None = None,
    level: float = 0.95,
) -> ValidationRow:
    """Re-estimate the selected policy on held-out data and check it against the oracle."""
    row = report.selected_row
    if row is None:
        raise ValueError("report has no selected policy")
    eval_log = as_log(eval_log) if eval_log is not None else None
    if eval_log is None or len(eval_log) == 0:
        raise ValueError("evaluation log is empty")
    est = ips_estimate(eval_log, row.policy, clip, level)
    v = true_value(row.policy, env)
    return ValidationRow(row.params, est, v, est.covers(v))


def compare_to_baseline(
    selected: Policy,
    baseline: Policy,
    eval_log,
    level: float = 0.95,
    clip: ClipConfig | None = None,
) -> PolicyValueEstimate:
    """Paired held-out estimate of ``V(selected) - V(baseline)``.

    The improvement is significant at ``level`` when ``ci_low > 0``.
    """
    return ips_difference(eval_log, selected, baseline, clip, level)
