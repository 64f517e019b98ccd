"""
Picking a threshold offline
===========================

Two thirds of the log choose the threshold; the held-out third gives an
honest estimate of the chosen policy and a paired comparison against a
baseline.
"""

import numpy as np

from cfeval import (
    RandomizationScheme,
    ScoreThresholdPolicy,
    collect,
    generate_scenario,
    grid_select,
    split,
    threshold_family,
    true_value,
    validate_selection,
)
from cfeval.optimizer import compare_to_baseline

env = generate_scenario(100, 4, 2, violation_rate=0.5).to_environment()
log = collect(env, RandomizationScheme("sigmoid-subset", lambda1=4.0, lambda2=-0.5), 100_000, master_seed=3)
train, held_out = split(log, seed=0)

family = threshold_family(np.round(np.linspace(0.1, 0.9, 9), 2), capacity=3.0)
report = grid_select(family, train)
for row in report.rows:
    mark = "*" if row.params == report.selected else " "
    print(f"{mark} tau={row.params[0]:.1f}  train {row.train_estimate.point:.4f}  "
          f"capacity {row.capacity:.2f}  oracle {true_value(row.policy, env):.4f}")

val = validate_selection(report, held_out, env)
print(f"held-out estimate {val.eval_estimate.point:.4f} "
      f"[{val.eval_estimate.ci_low:.4f}, {val.eval_estimate.ci_high:.4f}], oracle {val.true_value:.4f}")

diff = compare_to_baseline(report.selected_row.policy, ScoreThresholdPolicy(1.0), held_out)
print(f"gain over sending only the top candidate: {diff.point:+.4f} [{diff.ci_low:+.4f}, {diff.ci_high:+.4f}]")
