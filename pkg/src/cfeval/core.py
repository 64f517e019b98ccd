"""Contextual-bandit domain model and the exact policy-value oracle."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable

import numpy as np

from .errors import DomainError, LogFormatError, SizeError

ENV_SCHEMA = 1
MAX_SUBSET_CANDIDATES = 20
MAX_ATOMIC_ACTIONS = 1 << 20
MODES = ("atomic", "subset")
NOISE_KINDS = ("bernoulli", "fixed")


@dataclass(frozen=True)
class Context:
    """Observed context: an opaque id plus an ordered feature list.

    In subset mode the features are the candidate scores ``s_1..s_L``.
    """

    id: Hashable
    features: tuple[float, ...]

    def __post_init__(self):
        feats = tuple(float(v) for v in self.features)
        if not feats:
            raise DomainError("context needs at least one feature")
        if not all(math.isfinite(v) for v in feats):
            raise DomainError(f"context {self.id!r} has non-finite features")
        object.__setattr__(self, "features", feats)

    @property
    def size(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class Action:
    """An atomic action index, or a candidate subset that contains candidate 1.

    Subsets are indexed by the bitmask of the optional candidates: candidate
    ``i >= 2`` sets bit ``i - 2``.
    """

    index: int
    candidates: frozenset[int] | None = None

    def __post_init__(self):
        if self.index < 0:
            raise DomainError(f"negative action index {self.index}")
        if self.candidates is not None:
            if 1 not in self.candidates:
                raise DomainError("subset actions must include candidate 1")
            if _subset_index(self.candidates) != self.index:
                raise DomainError("subset index does not match its candidates")

    @classmethod
    def atomic(cls, index: int) -> "Action":
        return cls(int(index))

    @classmethod
    def subset(cls, candidates: Iterable[int]) -> "Action":
        cands = [int(c) for c in candidates]
        if len(set(cands)) != len(cands):
            raise DomainError(f"duplicate candidates in {cands}")
        if any(c < 1 for c in cands):
            raise DomainError("candidate indices start at 1")
        s = frozenset(cands)
        if 1 not in s:
            raise DomainError("subset actions must include candidate 1")
        return cls(_subset_index(s), s)

    @classmethod
    def from_subset_index(cls, index: int) -> "Action":
        index = int(index)
        cands = {1}
        bit, i = index, 2
        while bit:
            if bit & 1:
                cands.add(i)
            bit >>= 1
            i += 1
        return cls(index, frozenset(cands))

    @property
    def is_subset(self) -> bool:
        return self.candidates is not None

    @property
    def size(self) -> int:
        """Number of selected candidates (1 for atomic actions)."""
        return 1 if self.candidates is None else len(self.candidates)

    def to_json(self) -> int | list[int]:
        if self.candidates is None:
            return self.index
        return sorted(self.candidates)

    @classmethod
    def from_json(cls, value: Any) -> "Action":
        if isinstance(value, bool):
            raise LogFormatError(f"bad action {value!r}")
        if isinstance(value, int):
            return cls.atomic(value)
        if isinstance(value, list):
            return cls.subset(value)
        raise LogFormatError(f"bad action {value!r}")

    def __repr__(self) -> str:
        if self.candidates is None:
            return f"a{self.index}"
        return "{" + ",".join(map(str, sorted(self.candidates))) + "}"


def _subset_index(candidates: frozenset[int]) -> int:
    return sum(1 << (c - 2) for c in candidates if c >= 2)


def make_action(mode: str, index: int) -> Action:
    if mode == "subset":
        return Action.from_subset_index(index)
    return Action.atomic(index)


def subset_sizes(n_candidates: int) -> np.ndarray:
    """Selected-candidate count of every subset action, by index."""
    k = 1 << (n_candidates - 1)
    idx = np.arange(k, dtype=np.int64)
    sizes = np.ones(k, dtype=np.int64)
    for b in range(n_candidates - 1):
        sizes += (idx >> b) & 1
    return sizes


@dataclass(frozen=True)
class RewardVector:
    """One reward per action, each in [0, 1]."""

    rewards: tuple[float, ...]

    def __post_init__(self):
        r = tuple(float(v) for v in self.rewards)
        if not all(0.0 <= v <= 1.0 for v in r):
            raise DomainError("rewards must lie in [0, 1]")
        object.__setattr__(self, "rewards", r)

    def __getitem__(self, action: Action | int) -> float:
        i = action.index if isinstance(action, Action) else int(action)
        return self.rewards[i]

    def __len__(self) -> int:
        return len(self.rewards)


@dataclass(frozen=True, eq=False)
class EnvironmentSpec:
    """Finite tabular environment with known reward means.

    Parameters
    ----------
    contexts : sequence of Context
        The finite context set.
    probs : array-like, shape (n_contexts,)
        Occurrence probability of each context.
    reward_means : array-like, shape (n_contexts, n_actions)
        Mean reward of every (context, action) pair, in [0, 1].
    mode : {"atomic", "subset"}
        In subset mode every context carries ``L`` candidate scores and the
        action space is the ``2**(L-1)`` subsets containing candidate 1.
    noise : {"bernoulli", "fixed"}
        Realized rewards are Bernoulli draws from the mean, or the mean itself.
    """

    contexts: tuple[Context, ...]
    probs: np.ndarray
    reward_means: np.ndarray
    mode: str = "atomic"
    noise: str = "bernoulli"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ctxs = tuple(self.contexts)
        probs = np.array(self.probs, dtype=np.float64)
        means = np.array(self.reward_means, dtype=np.float64)
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.noise not in NOISE_KINDS:
            raise DomainError(f"unknown reward noise {self.noise!r}")
        if not ctxs:
            raise DomainError("environment needs at least one context")
        if len({c.id for c in ctxs}) != len(ctxs):
            raise DomainError("context ids must be unique")
        if probs.shape != (len(ctxs),):
            raise DomainError("one probability per context required")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DomainError("context probabilities must be finite and >= 0")
        if abs(math.fsum(probs.tolist()) - 1.0) > 1e-12:
            raise DomainError("context probabilities must sum to 1")
        if means.ndim != 2 or means.shape[0] != len(ctxs) or means.shape[1] < 1:
            raise DomainError("reward_means must have shape (n_contexts, n_actions)")
        if not np.all(np.isfinite(means)) or np.any(means < 0) or np.any(means > 1):
            raise DomainError("reward means must lie in [0, 1]")
        if self.mode == "subset":
            sizes = {c.size for c in ctxs}
            if len(sizes) != 1:
                raise DomainError("all contexts need the same number of candidates")
            L = sizes.pop()
            if L > MAX_SUBSET_CANDIDATES:
                raise SizeError(f"{L} candidates exceeds cap {MAX_SUBSET_CANDIDATES}")
            if means.shape[1] != 1 << (L - 1):
                raise DomainError(f"subset mode with L={L} needs {1 << (L - 1)} actions")
        probs.setflags(write=False)
        means.setflags(write=False)
        object.__setattr__(self, "contexts", ctxs)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "reward_means", means)

    @property
    def n_contexts(self) -> int:
        return len(self.contexts)

    @property
    def n_actions(self) -> int:
        return self.reward_means.shape[1]

    @property
    def n_candidates(self) -> int | None:
        return self.contexts[0].size if self.mode == "subset" else None

    def context_index(self, context_id: Hashable) -> int:
        for i, c in enumerate(self.contexts):
            if c.id == context_id:
                return i
        raise KeyError(context_id)

    def reward_vector(self, i: int) -> RewardVector:
        """Mean reward vector of context ``i``."""
        return RewardVector(tuple(self.reward_means[i]))

    def to_dict(self) -> dict:
        doc = {
            "schema": ENV_SCHEMA,
            "mode": self.mode,
            "noise": self.noise,
            "contexts": [{"id": c.id, "features": list(c.features)} for c in self.contexts],
            "probs": self.probs.tolist(),
            "reward_means": self.reward_means.tolist(),
        }
        if self.metadata:
            doc["metadata"] = self.metadata
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "EnvironmentSpec":
        if doc.get("schema", ENV_SCHEMA) != ENV_SCHEMA:
            raise LogFormatError(f"unknown environment schema {doc.get('schema')!r}")
        try:
            contexts = [Context(c["id"], tuple(c["features"])) for c in doc["contexts"]]
            return cls(
                contexts,
                doc["probs"],
                doc["reward_means"],
                mode=doc.get("mode", "atomic"),
                noise=doc.get("noise", "bernoulli"),
                metadata=doc.get("metadata", {}),
            )
        except (KeyError, TypeError) as exc:
            raise LogFormatError(f"malformed environment document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnvironmentSpec":
        return cls.from_dict(json.loads(text))


def enumerate_actions(env: EnvironmentSpec) -> list[Action]:
    """Every action of the environment, in index order."""
    if env.mode == "subset":
        L = env.n_candidates
        if L > MAX_SUBSET_CANDIDATES:
            raise SizeError(f"{L} candidates exceeds cap {MAX_SUBSET_CANDIDATES}")
        return [Action.from_subset_index(i) for i in range(1 << (L - 1))]
    if env.n_actions > MAX_ATOMIC_ACTIONS:
        raise SizeError(f"{env.n_actions} actions exceeds cap {MAX_ATOMIC_ACTIONS}")
    return [Action.atomic(i) for i in range(env.n_actions)]


def true_value(policy, env: EnvironmentSpec) -> float:
    """Exact value ``sum_x Pr(x) * E[r_pi(x)]`` of a deterministic policy."""
    acts = policy.action_indices(env.contexts)
    if np.any(acts >= env.n_actions):
        raise DomainError("policy picks an action outside the environment")
    picked = env.reward_means[np.arange(env.n_contexts), acts]
    return math.fsum((env.probs * picked).tolist())


def random_environment(
    n_contexts: int,
    n_actions: int,
    rng: np.random.Generator,
    *,
    n_features: int = 2,
    noise: str = "bernoulli",
) -> EnvironmentSpec:
    """Random atomic environment, handy for tests and demos."""
    raw = rng.uniform(0.5, 1.5, size=n_contexts)
    probs = raw / raw.sum()
    probs[-1] = 1.0 - math.fsum(probs[:-1].tolist())
    contexts = [
        Context(i, tuple(rng.uniform(-1, 1, size=n_features))) for i in range(n_contexts)
    ]
    means = rng.uniform(0, 1, size=(n_contexts, n_actions))
    return EnvironmentSpec(contexts, probs, means, noise=noise)
