"""Randomized exploration: selection distributions, seeded sampling, logging.

Every record carries a 64-bit seed.  The chosen action is the inverse-CDF
draw of the first SplitMix64 output of that seed, so
``sample_action(record.propensity_vector, record.seed)`` reproduces the
logged action exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import _rng
from .core import Action, Context, EnvironmentSpec, make_action
from .errors import DataIntegrityError, DomainError

SCHEME_KINDS = ("uniform", "sigmoid-subset", "explicit")
_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PropensityVector:
    """Action-selection distribution over the enumerated action set."""

    probs: np.ndarray
    mode: str = "atomic"

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("propensity vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise DomainError("every propensity must be finite and > 0")
        if abs(math.fsum(p.tolist()) - 1.0) > _SUM_TOL:
            raise DomainError(f"propensities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, action: Action | int) -> float:
        i = action.index if isinstance(action, Action) else int(action)
        return float(self.probs[i])

    def __eq__(self, other):
        return (
            isinstance(other, PropensityVector)
            and self.mode == other.mode
            and np.array_equal(self.probs, other.probs)
        )

    def tolist(self) -> list[float]:
        return self.probs.tolist()


@dataclass(frozen=True)
class RandomizationScheme:
    """How exploration randomizes actions.

    ``uniform`` picks every action with probability ``1/K``.
    ``sigmoid-subset`` always sends candidate 1 and sends candidate ``i >= 2``
    independently with probability ``1 / (1 + exp(lambda1 * (s_1 - s_i) + lambda2))``
    clipped into ``[clip_low, clip_high]``.  ``explicit`` reads a per-context
    distribution from ``table`` (context id -> probabilities).
    """

    kind: str = "uniform"
    lambda1: float = 1.0
    lambda2: float = 0.0
    clip_low: float = 0.1
    clip_high: float = 0.9
    table: Mapping[Hashable, Sequence[float]] | None = None

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise DomainError(f"unknown scheme kind {self.kind!r}")
        if not 0 < self.clip_low <= self.clip_high < 1:
            raise DomainError("need 0 < clip_low <= clip_high < 1")
        if self.kind == "explicit" and not self.table:
            raise DomainError("explicit scheme needs a table")

    def __hash__(self):
        return hash((self.kind, self.lambda1, self.lambda2, self.clip_low, self.clip_high))

    def to_dict(self) -> dict:
        doc = {
            "kind": self.kind,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "clip_low": self.clip_low,
            "clip_high": self.clip_high,
        }
        if self.table is not None:
            doc["table"] = [[k, list(map(float, v))] for k, v in self.table.items()]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RandomizationScheme":
        table = doc.get("table")
        if table is not None:
            table = {k: v for k, v in table}
        return cls(
            doc.get("kind", "uniform"),
            doc.get("lambda1", 1.0),
            doc.get("lambda2", 0.0),
            doc.get("clip_low", 0.1),
            doc.get("clip_high", 0.9),
            table,
        )


def inclusion_probabilities(scheme: RandomizationScheme, scores: Sequence[float]) -> np.ndarray:
    """Clipped inclusion probabilities ``q_2..q_L`` of the optional candidates."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise DomainError("empty candidate list")
    z = scheme.lambda1 * (s[0] - s[1:]) + scheme.lambda2
    with np.errstate(over="ignore"):
        q = 1.0 / (1.0 + np.exp(z))
    return np.clip(q, scheme.clip_low, scheme.clip_high)


def subset_propensities(q: np.ndarray) -> np.ndarray:
    """Probability of every subset (by bitmask index) under independent inclusions."""
    probs = np.ones(1)
    for qb in np.asarray(q, dtype=np.float64):
        probs = np.concatenate([probs * (1.0 - qb), probs * qb])
    return probs


def _distribution(scheme: RandomizationScheme, context: Context, n_actions: int | None, mode: str) -> np.ndarray:
    if scheme.kind == "sigmoid-subset":
        return subset_propensities(inclusion_probabilities(scheme, context.features))
    if scheme.kind == "explicit":
        try:
            return np.asarray(scheme.table[context.id], dtype=np.float64)
        except KeyError:
            raise DomainError(f"no distribution for context {context.id!r}") from None
    if n_actions is None:
        if mode != "subset":
            raise DomainError("uniform scheme needs the number of actions")
        n_actions = 1 << (context.size - 1)
    return np.full(n_actions, 1.0 / n_actions)


def selection_distribution(
    scheme: RandomizationScheme,
    context: Context,
    n_actions: int | None = None,
    mode: str | None = None,
) -> PropensityVector:
    """The distribution exploration draws from in ``context``.

    ``n_actions`` is needed for uniform atomic exploration; sigmoid-subset
    implies subset mode.
    """
    if mode is None:
        mode = "subset" if scheme.kind == "sigmoid-subset" else "atomic"
    return PropensityVector(_distribution(scheme, context, n_actions, mode), mode)


def distribution_table(scheme: RandomizationScheme, env: EnvironmentSpec) -> np.ndarray:
    """Selection distributions of every environment context, one row each."""
    if scheme.kind == "sigmoid-subset" and env.mode != "subset":
        raise DomainError("sigmoid-subset randomization needs a subset-mode environment")
    rows = [_distribution(scheme, c, env.n_actions, env.mode) for c in env.contexts]
    table = np.array(rows, dtype=np.float64)
    if table.shape != (env.n_contexts, env.n_actions):
        raise DomainError("scheme distributions do not match the action space")
    for row in table:
        PropensityVector(row)
    return table


def _inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    # cdf: (n, K) or (K,); u: (n,) or scalar.  Zero-mass trailing entries are
    # never chosen even if round-off leaves cdf[-1] slightly below u.
    cdf = np.atleast_2d(cdf)
    u = np.atleast_1d(u)
    idx = (cdf <= u[:, None]).sum(axis=1)
    over = idx >= cdf.shape[1]
    if over.any():
        if cdf.shape[0] == 1:
            rows = cdf[np.zeros(int(over.sum()), dtype=np.int64)]
        else:
            rows = cdf[over]
        mass = np.diff(rows, axis=1, prepend=0.0) > 0
        idx[over] = cdf.shape[1] - 1 - np.argmax(mass[:, ::-1], axis=1)
    return idx


def sample_indices(pvecs: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Vectorized replay: action index for each (distribution row, seed) pair."""
    cdf = np.cumsum(np.atleast_2d(pvecs), axis=1)
    return _inverse_cdf(cdf, _rng.seed_uniform(seeds))


def sample_action(dist: PropensityVector, seed: int) -> Action:
    """Inverse-CDF draw from ``dist`` using a generator reset to ``seed``."""
    cdf = np.cumsum(dist.probs)
    u = _rng.seed_uniform(seed)
    return make_action(dist.mode, int(_inverse_cdf(cdf, u)[0]))


@dataclass(frozen=True)
class ExplorationRecord:
    """One logged round ``(x, s, a, p_vec, r_a)``."""

    context: Context
    action: Action
    propensity: float
    reward: float
    seed: int | None = None
    propensity_vector: PropensityVector | None = None

    def __post_init__(self):
        if not self.propensity > 0:
            raise DataIntegrityError(f"propensity {self.propensity!r} is not > 0")
        if not 0.0 <= self.reward <= 1.0:
            raise DomainError(f"reward {self.reward!r} outside [0, 1]")
        if self.seed is not None and not 0 <= self.seed <= _rng.MASK64:
            raise DomainError("seed must be an unsigned 64-bit integer")

    @property
    def consistent(self) -> bool:
        """Logged propensity agrees with the logged vector (True if no vector)."""
        if self.propensity_vector is None:
            return True
        return self.propensity == self.propensity_vector[self.action]


class ExplorationLog(Sequence[ExplorationRecord]):
    """Column-oriented exploration log.

    Records index into a table of distinct contexts, and logged propensity
    vectors index into a table of distinct distributions, so large logs over
    big subset action spaces stay compact.  Indexing or iterating yields
    :class:`ExplorationRecord` objects.
    """

    def __init__(
        self,
        contexts: Sequence[Context],
        ctx: np.ndarray,
        action: np.ndarray,
        propensity: np.ndarray,
        reward: np.ndarray,
        *,
        mode: str = "atomic",
        seed: np.ndarray | None = None,
        pvec_table: np.ndarray | None = None,
        pvec_row: np.ndarray | None = None,
    ):
        self.contexts = tuple(contexts)
        self.ctx = np.asarray(ctx, dtype=np.int64)
        self.action = np.asarray(action, dtype=np.int64)
        self.propensity = np.asarray(propensity, dtype=np.float64)
        self.reward = np.asarray(reward, dtype=np.float64)
        self.mode = mode
        self.seed = None if seed is None else np.asarray(seed, dtype=np.uint64)
        self.pvec_table = None if pvec_table is None else np.atleast_2d(np.asarray(pvec_table, dtype=np.float64))
        self.pvec_row = None if pvec_row is None else np.asarray(pvec_row, dtype=np.int64)
        n = self.ctx.shape[0]
        for name in ("action", "propensity", "reward"):
            if getattr(self, name).shape != (n,):
                raise DomainError(f"column {name!r} has the wrong length")
        if self.seed is not None and self.seed.shape != (n,):
            raise DomainError("column 'seed' has the wrong length")
        if (self.pvec_table is None) != (self.pvec_row is None):
            raise DomainError("pvec_table and pvec_row go together")
        if self.pvec_row is not None and self.pvec_row.shape != (n,):
            raise DomainError("column 'pvec_row' has the wrong length")
        if n and (self.ctx.min() < 0 or self.ctx.max() >= len(self.contexts)):
            raise DomainError("context index out of range")
        if not np.all(self.propensity > 0):
            bad = int(np.argmin(self.propensity > 0))
            raise DataIntegrityError(f"record {bad}: propensity {self.propensity[bad]!r} is not > 0")
        if not np.all((self.reward >= 0) & (self.reward <= 1)):
            raise DomainError("rewards must lie in [0, 1]")
        for arr in (self.ctx, self.action, self.propensity, self.reward, self.seed, self.pvec_table, self.pvec_row):
            if arr is not None:
                arr.setflags(write=False)

    def __len__(self) -> int:
        return self.ctx.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.take(np.arange(len(self))[i])
        i = int(i)
        if i < 0:
            i += len(self)
        pv = None
        if self.pvec_table is not None:
            pv = PropensityVector(self.pvec_table[self.pvec_row[i]], self.mode)
        return ExplorationRecord(
            context=self.contexts[self.ctx[i]],
            action=make_action(self.mode, self.action[i]),
            propensity=float(self.propensity[i]),
            reward=float(self.reward[i]),
            seed=None if self.seed is None else int(self.seed[i]),
            propensity_vector=pv,
        )

    def __iter__(self) -> Iterator[ExplorationRecord]:
        for i in range(len(self)):
            yield self[i]

    @property
    def has_pvec(self) -> bool:
        return self.pvec_table is not None

    @property
    def has_seed(self) -> bool:
        return self.seed is not None

    @property
    def n_actions(self) -> int | None:
        if self.pvec_table is not None:
            return self.pvec_table.shape[1]
        if self.mode == "subset":
            return 1 << (self.contexts[0].size - 1)
        return None

    def pvecs(self) -> np.ndarray:
        """Per-record propensity vectors, shape (n, K)."""
        if self.pvec_table is None:
            raise DomainError("log has no propensity vectors")
        return self.pvec_table[self.pvec_row]

    def policy_actions(self, policy) -> np.ndarray:
        """Action index ``policy`` takes for every record."""
        return policy.action_indices(self.contexts)[self.ctx]

    def take(self, indices) -> "ExplorationLog":
        idx = np.asarray(indices, dtype=np.int64)
        return ExplorationLog(
            self.contexts,
            self.ctx[idx],
            self.action[idx],
            self.propensity[idx],
            self.reward[idx],
            mode=self.mode,
            seed=None if self.seed is None else self.seed[idx],
            pvec_table=self.pvec_table,
            pvec_row=None if self.pvec_row is None else self.pvec_row[idx],
        )

    def replace(self, **columns) -> "ExplorationLog":
        cols = dict(
            contexts=self.contexts,
            ctx=self.ctx,
            action=self.action,
            propensity=self.propensity,
            reward=self.reward,
            mode=self.mode,
            seed=self.seed,
            pvec_table=self.pvec_table,
            pvec_row=self.pvec_row,
        )
        cols.update(columns)
        return ExplorationLog(**cols)

    @classmethod
    def from_records(cls, records: Iterable[ExplorationRecord]) -> "ExplorationLog":
        records = list(records)
        if not records:
            raise DomainError("empty log")
        subset = records[0].action.is_subset
        if any(r.action.is_subset != subset for r in records):
            raise DomainError("log mixes atomic and subset actions")
        with_seed = all(r.seed is not None for r in records)
        with_pvec = all(r.propensity_vector is not None for r in records)
        ctx_ids: dict[Context, int] = {}
        pvec_ids: dict[tuple, int] = {}
        ctx, pvec_row = [], []
        for r in records:
            ctx.append(ctx_ids.setdefault(r.context, len(ctx_ids)))
            if with_pvec:
                key = tuple(r.propensity_vector.tolist())
                pvec_row.append(pvec_ids.setdefault(key, len(pvec_ids)))
        pvec_table = None
        if with_pvec:
            if len({len(k) for k in pvec_ids}) != 1:
                raise DomainError("propensity vectors differ in length")
            pvec_table = np.array(list(pvec_ids), dtype=np.float64)
        return cls(
            list(ctx_ids),
            np.array(ctx),
            np.array([r.action.index for r in records]),
            np.array([r.propensity for r in records]),
            np.array([r.reward for r in records]),
            mode="subset" if subset else "atomic",
            seed=np.array([r.seed for r in records], dtype=np.uint64) if with_seed else None,
            pvec_table=pvec_table,
            pvec_row=np.array(pvec_row) if pvec_table is not None else None,
        )

    @classmethod
    def concat(cls, logs: Sequence["ExplorationLog"]) -> "ExplorationLog":
        """Join logs; context and distribution tables are merged."""
        logs = list(logs)
        if len(logs) == 1:
            return logs[0]
        if len({lg.mode for lg in logs}) != 1:
            raise DomainError("cannot join logs of different modes")
        ctx_ids: dict[Context, int] = {}
        ctxs = []
        for lg in logs:
            remap = np.array([ctx_ids.setdefault(c, len(ctx_ids)) for c in lg.contexts], dtype=np.int64)
            ctxs.append(remap[lg.ctx])
        seed = None
        if all(lg.has_seed for lg in logs):
            seed = np.concatenate([lg.seed for lg in logs])
        pvec_table = pvec_row = None
        if all(lg.has_pvec for lg in logs):
            pv_ids: dict[tuple, int] = {}
            rows = []
            for lg in logs:
                remap = np.array(
                    [pv_ids.setdefault(tuple(row.tolist()), len(pv_ids)) for row in lg.pvec_table],
                    dtype=np.int64,
                )
                rows.append(remap[lg.pvec_row])
            pvec_table = np.array(list(pv_ids), dtype=np.float64)
            pvec_row = np.concatenate(rows)
        return cls(
            list(ctx_ids),
            np.concatenate(ctxs),
            np.concatenate([lg.action for lg in logs]),
            np.concatenate([lg.propensity for lg in logs]),
            np.concatenate([lg.reward for lg in logs]),
            mode=logs[0].mode,
            seed=seed,
            pvec_table=pvec_table,
            pvec_row=pvec_row,
        )

    def __eq__(self, other):
        if not isinstance(other, ExplorationLog) or len(self) != len(other):
            return False
        return all(a == b for a, b in zip(self, other))

    def __repr__(self):
        return f"ExplorationLog(n={len(self)}, mode={self.mode!r}, contexts={len(self.contexts)})"


def as_log(log) -> ExplorationLog:
    """Accept an :class:`ExplorationLog` or any iterable of records."""
    if isinstance(log, ExplorationLog):
        return log
    return ExplorationLog.from_records(log)


def collect(
    env: EnvironmentSpec,
    scheme: RandomizationScheme,
    n: int,
    master_seed: int,
    *,
    start: int = 0,
    chunk_size: int = 1 << 16,
) -> ExplorationLog:
    """Run ``n`` exploration rounds against ``env``.

    Record ``i`` (counting from ``start``) gets seed ``splitmix(master_seed, i+1)``
    and draws its context and reward from a separate environment stream keyed
    on the same index, so any contiguous shard ``[start, start+n)`` matches
    the corresponding slice of a single large run.  Only the chosen action's
    reward is recorded.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    table = distribution_table(scheme, env)
    cdf = np.cumsum(table, axis=1)
    ctx_cdf = np.cumsum(env.probs)
    ctx_parts, act_parts, rew_parts, seed_parts = [], [], [], []
    for lo in range(start, start + n, chunk_size):
        hi = min(lo + chunk_size, start + n)
        u_ctx = _rng.env_uniforms(master_seed, lo, hi, _rng.LANE_CONTEXT)
        ctx = _context_draw(ctx_cdf, env.probs, u_ctx)
        seeds = _rng.record_seeds(master_seed, lo, hi)
        act = _inverse_cdf(cdf[ctx], _rng.seed_uniform(seeds))
        means = env.reward_means[ctx, act]
        if env.noise == "fixed":
            rew = means.copy()
        else:
            u_r = _rng.env_uniforms(master_seed, lo, hi, _rng.LANE_REWARD)
            rew = (u_r < means).astype(np.float64)
        ctx_parts.append(ctx)
        act_parts.append(act)
        rew_parts.append(rew)
        seed_parts.append(seeds)
    ctx = np.concatenate(ctx_parts)
    act = np.concatenate(act_parts)
    return ExplorationLog(
        env.contexts,
        ctx,
        act,
        table[ctx, act],
        np.concatenate(rew_parts),
        mode=env.mode,
        seed=np.concatenate(seed_parts),
        pvec_table=table,
        pvec_row=ctx,
    )


def _context_draw(ctx_cdf: np.ndarray, probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(ctx_cdf, u, side="right")
    last = len(probs) - 1 - int(np.argmax(probs[::-1] > 0))
    return np.minimum(idx, last)


def _factor_vector(factor, log: ExplorationLog) -> np.ndarray | float:
    if isinstance(factor, Mapping):
        keys = [a.index if isinstance(a, Action) else int(a) for a in factor]
        k = log.n_actions
        if k is None:
            k = max(keys + [int(log.action.max())]) + 1
        if max(keys) >= k:
            raise ValueError("factor map names an action outside the action space")
        f = np.ones(k)
        for a, v in factor.items():
            f[a.index if isinstance(a, Action) else int(a)] = float(v)
        return f
    return float(factor)


def corrupt_propensities(log, factor: float | Mapping[Action | int, float]) -> ExplorationLog:
    """Negative control: scale logged propensities without touching actions.

    ``factor`` is a scalar or a per-action map (unlisted actions keep factor
    1).  Logged vectors are scaled entrywise and renormalized and each
    record's ``p`` is re-read from its vector; records without a vector have
    ``p`` scaled directly.  A scalar factor on vector-carrying logs is a
    fixed point of renormalization: the log comes back unchanged with a
    warning.
    """
    log = as_log(log)
    f = _factor_vector(factor, log)
    fv = np.atleast_1d(np.asarray(f, dtype=np.float64))
    if np.any(fv <= 0) or not np.all(np.isfinite(fv)):
        raise ValueError("factors must be finite and > 0")
    if np.all(fv == 1.0):
        return log
    if log.has_pvec:
        if np.ndim(f) == 0:
            warnings.warn(
                "a uniform factor is undone by renormalization; pass a per-action "
                "factor map to corrupt propensity vectors",
                stacklevel=2,
            )
            return log
        scaled = log.pvec_table * f
        if np.any((scaled >= 1.0) & (f != 1.0)):
            raise ValueError("factor pushes a propensity to >= 1")
        table = scaled / scaled.sum(axis=1, keepdims=True)
        return log.replace(pvec_table=table, propensity=table[log.pvec_row, log.action])
    scaled = log.propensity * (f if np.ndim(f) == 0 else f[log.action])
    if np.any(scaled >= 1.0):
        raise ValueError("factor pushes a propensity to >= 1")
    return log.replace(propensity=scaled)
