"""Synthetic query-rewrite scenario with subset actions.

Each query has ``L`` scored rewrite candidates.  Candidate ``i`` independently
satisfies the user with probability ``c_i`` (rising with its score), and a
"harmful" candidate multiplies the page's reward by ``1 - h_i``.  The mean
reward of sending subset ``S`` is

    (1 - prod_{i in S} (1 - c_i)) * prod_{i in S} (1 - h_i)

With no harmful candidates adding a candidate never lowers the mean.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .collector import inclusion_probabilities
from .core import Action, Context, EnvironmentSpec
from .errors import DomainError
from .policy import LookupTablePolicy, Policy

MAX_L = 8


@dataclass(frozen=True, eq=False)
class SpellerScenario:
    scores: np.ndarray
    probs: np.ndarray
    success: np.ndarray
    harm: np.ndarray
    noise: str = "bernoulli"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scores.ndim != 2 or not 1 <= self.scores.shape[1] <= MAX_L:
            raise DomainError(f"scenario needs 1..{MAX_L} candidates per query")
        if abs(math.fsum(self.probs.tolist()) - 1.0) > 1e-12:
            raise DomainError("query probabilities must sum to 1")
        if np.any(self.harm[:, 0] != 0):
            raise DomainError("the top candidate cannot be harmful")

    @property
    def num_queries(self) -> int:
        return self.scores.shape[0]

    @property
    def L(self) -> int:
        return self.scores.shape[1]

    @property
    def contexts(self) -> list[Context]:
        return [Context(f"q{j}", tuple(self.scores[j])) for j in range(self.num_queries)]

    def subset_mean(self, query: int, candidates) -> float:
        """Mean reward of sending ``candidates`` (1-based) for ``query``."""
        miss, keep = 1.0, 1.0
        for i in candidates:
            miss *= 1.0 - self.success[query, i - 1]
            keep *= 1.0 - self.harm[query, i - 1]
        return (1.0 - miss) * keep

    def reward_table(self) -> np.ndarray:
        """Mean reward of every (query, subset) pair, subsets by bitmask index."""
        k = 1 << (self.L - 1)
        miss = np.repeat((1.0 - self.success[:, :1]), k, axis=1)
        keep = np.ones((self.num_queries, k))
        idx = np.arange(k)
        for b in range(self.L - 1):
            on = ((idx >> b) & 1).astype(bool)
            miss[:, on] *= (1.0 - self.success[:, b + 1])[:, None]
            keep[:, on] *= (1.0 - self.harm[:, b + 1])[:, None]
        return np.clip((1.0 - miss) * keep, 0.0, 1.0)

    def value(self, policy: Policy) -> float:
        """Policy value computed straight from the candidate model."""
        total = []
        for j, ctx in enumerate(self.contexts):
            total.append(self.probs[j] * self.subset_mean(j, policy(ctx).candidates))
        return math.fsum(total)

    def to_environment(self) -> EnvironmentSpec:
        return EnvironmentSpec(
            self.contexts,
            self.probs,
            self.reward_table(),
            mode="subset",
            noise=self.noise,
            metadata={"scenario": self.metadata},
        )

    def to_dict(self) -> dict:
        doc = self.to_environment().to_dict()
        doc["scenario"] = {
            **self.metadata,
            "success": self.success.tolist(),
            "harm": self.harm.tolist(),
        }
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "SpellerScenario":
        block = dict(doc["scenario"])
        success = np.array(block.pop("success"), dtype=np.float64)
        harm = np.array(block.pop("harm"), dtype=np.float64)
        scores = np.array([c["features"] for c in doc["contexts"]], dtype=np.float64)
        return cls(scores, np.array(doc["probs"]), success, harm, doc.get("noise", "bernoulli"), block)


def generate_scenario(
    num_queries: int,
    L: int,
    seed: int,
    *,
    violation_rate: float = 0.0,
    score_range: tuple[float, float] = (0.0, 1.0),
    noise: str = "bernoulli",
) -> SpellerScenario:
    """Random scenario, deterministic in ``seed``.

    Scores are uniform on ``score_range`` and sorted so candidate 1 is the
    top candidate.  ``violation_rate`` controls how often optional candidates
    are harmful; low-scoring candidates are harmful more often, which gives
    score thresholds an interior optimum.
    """
    if not 1 <= L <= MAX_L:
        raise ValueError(f"L must be in 1..{MAX_L}, got {L}")
    if num_queries < 1:
        raise ValueError("num_queries must be >= 1")
    if not 0 <= violation_rate <= 1:
        raise ValueError("violation_rate must be in [0, 1]")
    lo, hi = score_range
    if not hi > lo:
        raise ValueError("empty score range")
    rng = np.random.default_rng(seed)
    scores = -np.sort(-rng.uniform(lo, hi, size=(num_queries, L)), axis=1)
    w = rng.uniform(0.5, 1.5, size=num_queries)
    probs = w / w.sum()
    probs[-1] = 1.0 - math.fsum(probs[:-1].tolist())
    rel = (scores - lo) / (hi - lo)
    success = 0.05 + 0.45 * rel * rng.uniform(0.6, 1.0, size=rel.shape)
    p_harm = np.clip(2.0 * violation_rate * (1.0 - rel), 0.0, 1.0)
    harmful = rng.uniform(size=rel.shape) < p_harm
    harmful[:, 0] = False
    harm = np.where(harmful, rng.uniform(0.1, 0.4, size=rel.shape), 0.0)
    success = np.where(harmful, 0.0, success)
    meta = {
        "generator": "speller-v1",
        "num_queries": num_queries,
        "L": L,
        "seed": seed,
        "violation_rate": violation_rate,
        "score_range": [lo, hi],
    }
    return SpellerScenario(scores, probs, success, harm, noise, meta)


def to_environment(scenario: SpellerScenario) -> EnvironmentSpec:
    """Subset-mode environment over the ``2**(L-1)`` subsets containing candidate 1."""
    return scenario.to_environment()


def aligned_policy(scenario_or_env, scheme) -> Policy:
    """Lookup policy sending exactly the candidates exploration favours (``q_i >= 0.5``)."""
    contexts = scenario_or_env.contexts
    table = {}
    for c in contexts:
        q = inclusion_probabilities(scheme, c.features)
        table[c.id] = Action.subset([1] + [i + 2 for i in range(q.size) if q[i] >= 0.5])
    return LookupTablePolicy(table, mode="subset")
