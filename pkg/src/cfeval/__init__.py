"""Counterfactual evaluation and optimization of policies from exploration logs."""

from .bootstrap import BootstrapResult, bootstrap_vs_analytic, histogram, online_bootstrap
from .collector import (
    ExplorationLog,
    ExplorationRecord,
    PropensityVector,
    RandomizationScheme,
    collect,
    corrupt_propensities,
    sample_action,
    selection_distribution,
)
from .core import Action, Context, EnvironmentSpec, RewardVector, enumerate_actions, true_value
from .diagnostics import (
    DiagnosticReport,
    arithmetic_mean_test,
    harmonic_mean_test,
    replay_verify,
    sweep,
)
from .estimator import (
    ClipConfig,
    PolicyValueEstimate,
    biased_estimate,
    compare,
    daily_comparison,
    ips_estimate,
    ips_variance,
    simulate_online,
)
from .optimizer import (
    OptimizationReport,
    PolicyFamily,
    grid_select,
    split,
    threshold_family,
    validate_selection,
)
from .policy import (
    LinearArgmaxPolicy,
    LookupTablePolicy,
    Policy,
    ScoreThresholdPolicy,
    apply_policy,
)
from .speller import SpellerScenario, generate_scenario, to_environment

__version__ = "0.1.0"
