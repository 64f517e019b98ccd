"""Deterministic policy families.

Three families are supported: ``lookup-table`` (explicit context -> action
map), ``score-threshold`` (subset mode: send every candidate whose score
clears a threshold) and ``linear-argmax`` (highest linear score wins, ties to
the lowest action index).
"""

from __future__ import annotations

import json
from typing import Hashable, Mapping, Sequence

import numpy as np

from .core import Action, Context, make_action, subset_sizes
from .errors import DomainError

FAMILIES = ("lookup-table", "score-threshold", "linear-argmax")


class Policy:
    """Base class: a deterministic map from contexts to actions."""

    family: str = ""
    mode: str = "atomic"

    def action_index(self, context: Context) -> int:
        raise NotImplementedError

    def action_indices(self, contexts: Sequence[Context]) -> np.ndarray:
        return np.array([self.action_index(c) for c in contexts], dtype=np.int64)

    def __call__(self, context: Context) -> Action:
        return make_action(self.mode, self.action_index(context))

    @property
    def params(self) -> dict:
        raise NotImplementedError

    @property
    def policy_id(self) -> str:
        return self.family + json.dumps(self.params, sort_keys=True, separators=(",", ":"))

    def to_dict(self) -> dict:
        return {"family": self.family, "mode": self.mode, "params": self.params}

    def __eq__(self, other):
        return type(other) is type(self) and other.to_dict() == self.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def __repr__(self):
        return f"{type(self).__name__}({self.params})"


class LookupTablePolicy(Policy):
    family = "lookup-table"

    def __init__(self, table: Mapping[Hashable, Action | int], mode: str = "atomic"):
        self.mode = mode
        self.table = {
            k: v if isinstance(v, Action) else make_action(mode, v) for k, v in table.items()
        }
        for a in self.table.values():
            if a.is_subset != (mode == "subset"):
                raise DomainError(f"action {a!r} does not match mode {mode!r}")

    def action_index(self, context: Context) -> int:
        try:
            return self.table[context.id].index
        except KeyError:
            raise DomainError(f"context {context.id!r} not in lookup table") from None

    def __call__(self, context: Context) -> Action:
        self.action_index(context)
        return self.table[context.id]

    @property
    def params(self) -> dict:
        return {"table": [[k, a.to_json()] for k, a in self.table.items()]}


class ScoreThresholdPolicy(Policy):
    """Subset policy: candidate 1 always, candidate ``i >= 2`` iff ``s_i >= tau``."""

    family = "score-threshold"
    mode = "subset"

    def __init__(self, tau: float, n_candidates: int | None = None):
        self.tau = float(tau)
        self.n_candidates = n_candidates

    def action_index(self, context: Context) -> int:
        s = context.features
        if self.n_candidates is not None and len(s) != self.n_candidates:
            raise DomainError(
                f"expected {self.n_candidates} candidate scores, got {len(s)}"
            )
        return sum(1 << (i - 1) for i in range(1, len(s)) if s[i] >= self.tau)

    def action_indices(self, contexts: Sequence[Context]) -> np.ndarray:
        if not contexts:
            return np.zeros(0, dtype=np.int64)
        if self.n_candidates is not None:
            return super().action_indices(contexts)
        try:
            scores = np.array([c.features for c in contexts], dtype=np.float64)
        except ValueError:
            return super().action_indices(contexts)
        inc = scores[:, 1:] >= self.tau
        weights = np.left_shift(1, np.arange(inc.shape[1], dtype=np.int64))
        return inc.astype(np.int64) @ weights

    @property
    def params(self) -> dict:
        return {"tau": self.tau}


class LinearArgmaxPolicy(Policy):
    """Pick ``argmax_a (W @ features + b)_a``; ties go to the lowest index."""

    family = "linear-argmax"

    def __init__(self, weights, bias=None, mode: str = "atomic"):
        self.weights = np.array(weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise DomainError("weights must be a (n_actions, n_features) matrix")
        k = self.weights.shape[0]
        self.bias = np.zeros(k) if bias is None else np.array(bias, dtype=np.float64)
        if self.bias.shape != (k,):
            raise DomainError("bias needs one entry per action")
        self.mode = mode
        self.weights.setflags(write=False)
        self.bias.setflags(write=False)

    @property
    def n_actions(self) -> int:
        return self.weights.shape[0]

    def _scores(self, feats: np.ndarray) -> np.ndarray:
        if feats.shape[-1] != self.weights.shape[1]:
            raise DomainError(
                f"policy expects {self.weights.shape[1]} features, got {feats.shape[-1]}"
            )
        return feats @ self.weights.T + self.bias

    def action_index(self, context: Context) -> int:
        return int(np.argmax(self._scores(np.asarray(context.features))))

    def action_indices(self, contexts: Sequence[Context]) -> np.ndarray:
        if not contexts:
            return np.zeros(0, dtype=np.int64)
        try:
            feats = np.array([c.features for c in contexts], dtype=np.float64)
        except ValueError:
            raise DomainError("contexts have differing feature counts") from None
        return np.argmax(self._scores(feats), axis=1).astype(np.int64)

    @property
    def params(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist()}


def apply_policy(policy: Policy, context: Context) -> Action:
    """The action ``policy`` takes in ``context``."""
    return policy(context)


def expected_selection_size(policy: Policy, contexts: Sequence[Context], weights=None) -> float:
    """Average number of selected candidates over ``contexts``.

    ``weights`` (e.g. context probabilities or empirical counts) default to
    uniform.
    """
    acts = policy.action_indices(contexts)
    if policy.mode == "subset":
        L = contexts[0].size
        sizes = subset_sizes(L)[acts]
    else:
        sizes = np.ones(len(acts))
    if weights is None:
        return float(sizes.mean())
    w = np.asarray(weights, dtype=np.float64)
    return float(np.dot(w, sizes) / w.sum())


def policy_from_dict(doc: dict) -> Policy:
    family = doc.get("family")
    params = doc.get("params", {})
    mode = doc.get("mode", "atomic")
    if family == "lookup-table":
        return LookupTablePolicy(
            {k: Action.from_json(v) for k, v in params["table"]}, mode=mode
        )
    if family == "score-threshold":
        return ScoreThresholdPolicy(params["tau"], params.get("n_candidates"))
    if family == "linear-argmax":
        return LinearArgmaxPolicy(params["weights"], params.get("bias"), mode=mode)
    raise DomainError(f"unknown policy family {family!r}")
