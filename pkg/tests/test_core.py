import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfeval import (
    Action,
    Context,
    EnvironmentSpec,
    LinearArgmaxPolicy,
    LookupTablePolicy,
    RewardVector,
    ScoreThresholdPolicy,
    apply_policy,
    enumerate_actions,
    true_value,
)
from cfeval.core import random_environment
from cfeval.errors import DomainError, SizeError


class TestApplyPolicy:
    def test_lookup_table(self):
        pol = LookupTablePolicy({"x1": Action.atomic(2)})
        assert apply_policy(pol, Context("x1", (0.0,))) == Action.atomic(2)

    def test_lookup_unknown_context(self):
        pol = LookupTablePolicy({"x1": 2})
        with pytest.raises(DomainError):
            apply_policy(pol, Context("x9", (0.0,)))

    def test_linear_argmax_ties_to_lowest_index(self):
        pol = LinearArgmaxPolicy(np.zeros((3, 2)))
        assert apply_policy(pol, Context(0, (0.3, -1.0))) == Action.atomic(0)

    def test_linear_argmax_partial_tie(self):
        pol = LinearArgmaxPolicy([[0.0], [1.0], [1.0]])
        assert apply_policy(pol, Context(0, (2.0,))).index == 1

    def test_linear_feature_mismatch(self):
        pol = LinearArgmaxPolicy(np.ones((3, 2)))
        with pytest.raises(DomainError):
            apply_policy(pol, Context(0, (1.0, 2.0, 3.0)))

    def test_score_threshold_example(self):
        # candidate by candidate: 1 is forced, 0.4 < 0.5 drops 2, 0.7 >= 0.5 keeps 3
        scores = (0.9, 0.4, 0.7)
        expected = {1} | {i + 1 for i in range(1, 3) if scores[i] >= 0.5}
        got = apply_policy(ScoreThresholdPolicy(0.5), Context("q", scores))
        assert got == Action.subset(expected) == Action.subset({1, 3})

    def test_score_threshold_domain(self):
        pol = ScoreThresholdPolicy(0.5, n_candidates=3)
        with pytest.raises(DomainError):
            pol(Context("q", (0.9, 0.4)))

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(0)
        ctxs = [Context(i, tuple(rng.uniform(0, 1, 5))) for i in range(50)]
        for pol in (ScoreThresholdPolicy(0.4), LinearArgmaxPolicy(rng.normal(size=(4, 5)))):
            assert pol.action_indices(ctxs).tolist() == [pol(c).index for c in ctxs]

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.floats(-5, 5))
    def test_pure(self, feats, tau):
        ctx = Context("q", tuple(feats))
        pol = ScoreThresholdPolicy(tau)
        assert pol(ctx) == pol(ctx)
        assert 1 in pol(ctx).candidates


class TestActions:
    def test_subset_must_contain_top(self):
        with pytest.raises(DomainError):
            Action.subset({2, 3})

    def test_subset_duplicates(self):
        with pytest.raises(DomainError):
            Action.subset([1, 2, 2])

    def test_index_roundtrip(self):
        for i in range(64):
            a = Action.from_subset_index(i)
            assert Action.subset(a.candidates) == a

    def test_json(self):
        assert Action.from_json(Action.subset({1, 3}).to_json()) == Action.subset({1, 3})
        assert Action.from_json(3) == Action.atomic(3)


def _subset_env(L):
    ctx = Context("q", tuple(np.linspace(1, 0, L)))
    return EnvironmentSpec([ctx], [1.0], np.zeros((1, 1 << (L - 1))), mode="subset")


class TestEnumerateActions:
    def test_atomic(self, two_by_two):
        assert enumerate_actions(two_by_two) == [Action.atomic(0), Action.atomic(1)]

    def test_atomic_three(self):
        env = EnvironmentSpec([Context(0, (0.0,))], [1.0], [[0.1, 0.2, 0.3]])
        assert [a.index for a in enumerate_actions(env)] == [0, 1, 2]

    def test_subset_three(self):
        got = [set(a.candidates) for a in enumerate_actions(_subset_env(3))]
        assert got == [{1}, {1, 2}, {1, 3}, {1, 2, 3}]

    def test_subset_one(self):
        assert [set(a.candidates) for a in enumerate_actions(_subset_env(1))] == [{1}]

    @pytest.mark.parametrize("L", range(1, 9))
    def test_subset_count(self, L):
        acts = enumerate_actions(_subset_env(L))
        assert len(acts) == 2 ** (L - 1)
        assert len(set(acts)) == len(acts)
        assert all(1 in a.candidates for a in acts)

    def test_size_cap(self):
        ctx = Context("q", tuple(range(21)))
        with pytest.raises(SizeError):
            EnvironmentSpec([ctx], [1.0], np.zeros((1, 1)), mode="subset")


class TestTrueValue:
    def test_degenerate(self):
        env = EnvironmentSpec([Context(0, (0.0,))], [1.0], [[1.0, 0.0]])
        assert true_value(LookupTablePolicy({0: 0}), env) == 1.0

    def test_two_equiprobable(self):
        env = EnvironmentSpec([Context(0, (0.0,)), Context(1, (0.0,))], [0.5, 0.5], [[0.2], [0.6]])
        assert true_value(LookupTablePolicy({0: 0, 1: 0}), env) == pytest.approx(0.4, abs=1e-15)

    def test_matches_monte_carlo_rollout(self):
        rng = np.random.default_rng(5)
        env = random_environment(5, 4, rng)
        pol = LookupTablePolicy({c.id: int(rng.integers(4)) for c in env.contexts})
        # independent rollout with numpy's generator
        n = 10**6
        ctx = rng.choice(5, size=n, p=env.probs)
        acts = np.array([pol.table[c.id].index for c in env.contexts])
        r = rng.uniform(size=n) < env.reward_means[ctx, acts[ctx]]
        se = r.std(ddof=1) / math.sqrt(n)
        assert abs(r.mean() - true_value(pol, env)) < 3 * se

    @settings(max_examples=50)
    @given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_in_unit_interval(self, c, k, seed):
        rng = np.random.default_rng(seed)
        env = random_environment(c, k, rng)
        pol = LinearArgmaxPolicy(rng.normal(size=(k, 2)))
        assert 0.0 <= true_value(pol, env) <= 1.0

    def test_equal_on_support(self):
        ctxs = [Context(i, (0.0,)) for i in range(3)]
        env = EnvironmentSpec(ctxs, [0.5, 0.5, 0.0], [[0.1, 0.9]] * 3)
        a = LookupTablePolicy({0: 0, 1: 1, 2: 0})
        b = LookupTablePolicy({0: 0, 1: 1, 2: 1})
        assert true_value(a, env) == true_value(b, env)


class TestEnvironmentSpec:
    def test_probs_must_sum_to_one(self):
        with pytest.raises(DomainError):
            EnvironmentSpec([Context(0, (0.0,))], [0.9], [[0.5]])

    def test_means_in_unit_interval(self):
        with pytest.raises(DomainError):
            EnvironmentSpec([Context(0, (0.0,))], [1.0], [[1.5]])

    def test_context_invariants(self):
        with pytest.raises(DomainError):
            Context(0, ())
        with pytest.raises(DomainError):
            Context(0, (math.inf,))

    def test_reward_vector(self, two_by_two):
        rv = two_by_two.reward_vector(0)
        assert rv[1] == 0.7 and len(rv) == 2
        with pytest.raises(DomainError):
            RewardVector((0.5, 1.2))

    def test_json_roundtrip(self, two_by_two):
        doc = json.loads(two_by_two.to_json())
        assert set(doc) >= {"contexts", "probs", "reward_means", "mode"}
        back = EnvironmentSpec.from_json(two_by_two.to_json())
        assert back.to_json() == two_by_two.to_json()
        assert np.array_equal(back.reward_means, two_by_two.reward_means)

    def test_immutable(self, two_by_two):
        with pytest.raises(ValueError):
            two_by_two.reward_means[0, 0] = 1.0
