import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfeval import (
    Action,
    Context,
    EnvironmentSpec,
    ExplorationLog,
    ExplorationRecord,
    PropensityVector,
    RandomizationScheme,
    collect,
    corrupt_propensities,
    sample_action,
    selection_distribution,
)
from cfeval.collector import distribution_table, inclusion_probabilities, sample_indices, subset_propensities
from cfeval.core import random_environment
from cfeval.errors import DataIntegrityError, DomainError


def _uniform_env(k, n_ctx=1):
    ctxs = [Context(i, (float(i),)) for i in range(n_ctx)]
    return EnvironmentSpec(ctxs, np.full(n_ctx, 1 / n_ctx), np.full((n_ctx, k), 0.3))


class TestSelectionDistribution:
    def test_uniform(self):
        pv = selection_distribution(RandomizationScheme(), Context(0, (0.0,)), n_actions=4)
        assert pv.tolist() == [0.25] * 4

    def test_sigmoid_symmetric(self):
        q = inclusion_probabilities(RandomizationScheme("sigmoid-subset"), (0.7, 0.7, 0.7))
        assert q.tolist() == [0.5, 0.5]

    def test_sigmoid_clipped(self):
        sch = RandomizationScheme("sigmoid-subset", lambda1=50.0)
        assert inclusion_probabilities(sch, (1.0, 0.0)).tolist() == [0.1]
        assert inclusion_probabilities(sch, (0.0, 1.0)).tolist() == [0.9]

    def test_product_of_inclusions(self):
        probs = subset_propensities(np.array([0.5, 0.8]))
        assert probs[Action.subset({1, 2}).index] == pytest.approx(0.5 * 0.2, abs=1e-15)
        assert probs.sum() == pytest.approx(1.0)

    def test_empty_candidates(self):
        with pytest.raises(DomainError):
            inclusion_probabilities(RandomizationScheme("sigmoid-subset"), ())

    @settings(max_examples=50)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.floats(-5, 5), st.floats(-3, 3))
    def test_subset_distribution_valid(self, scores, l1, l2):
        sch = RandomizationScheme("sigmoid-subset", lambda1=l1, lambda2=l2)
        pv = selection_distribution(sch, Context(0, tuple(scores)))
        assert len(pv) == 2 ** (len(scores) - 1)
        assert pv.probs.min() > 0
        assert abs(pv.probs.sum() - 1) < 1e-12

    def test_subset_matches_explicit_product(self):
        sch = RandomizationScheme("sigmoid-subset", lambda1=3.0, lambda2=0.2)
        s = (0.9, 0.6, 0.3, 0.8)
        q = inclusion_probabilities(sch, s)
        pv = selection_distribution(sch, Context(0, s))
        for a in range(8):
            cand = Action.from_subset_index(a).candidates
            expect = np.prod([q[i - 2] if i in cand else 1 - q[i - 2] for i in range(2, 5)])
            assert pv[a] == pytest.approx(expect, rel=1e-12)

    def test_propensity_vector_rejects_zero(self):
        with pytest.raises(DomainError):
            PropensityVector([1.0, 0.0])


class TestSampleAction:
    def test_single_action(self):
        pv = PropensityVector([1.0])
        assert all(sample_action(pv, s) == Action.atomic(0) for s in range(50))

    @given(st.integers(0, 2**64 - 1))
    def test_deterministic(self, seed):
        pv = PropensityVector([0.1, 0.2, 0.3, 0.4])
        assert sample_action(pv, seed) == sample_action(pv, seed)

    def test_frequencies(self):
        pv = PropensityVector([0.1, 0.2, 0.3, 0.4])
        idx = sample_indices(pv.probs, np.arange(1, 40001, dtype=np.uint64) * 7919)
        freq = np.bincount(idx, minlength=4) / idx.size
        assert np.allclose(freq, pv.probs, atol=4 * np.sqrt(0.25 / idx.size))

    def test_scalar_matches_vectorized(self):
        pv = PropensityVector([0.3, 0.3, 0.4])
        seeds = np.arange(100, dtype=np.uint64) * 1234567
        vec = sample_indices(pv.probs, seeds)
        assert [sample_action(pv, int(s)).index for s in seeds] == vec.tolist()


class TestCollect:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            collect(_uniform_env(2), RandomizationScheme(), 0, 1)

    def test_reproducible(self, speller, sigmoid):
        env = speller.to_environment()
        a = collect(env, sigmoid, 500, 42)
        b = collect(env, sigmoid, 500, 42)
        assert a == b
        assert np.array_equal(a.seed, b.seed)
        assert not np.array_equal(a.action, collect(env, sigmoid, 500, 43).action)

    def test_uniform_counts(self):
        log = collect(_uniform_env(4), RandomizationScheme(), 10**5, 7)
        counts = np.bincount(log.action, minlength=4)
        assert np.all(np.abs(counts - 25000) <= 500)

    def test_record_fields(self, ten_context_env):
        log = collect(ten_context_env, RandomizationScheme(), 200, 3)
        assert len(log) == 200
        for rec in log:
            assert rec.consistent
            assert rec.propensity == 0.25
            assert rec.reward in (0.0, 1.0)
            assert rec.seed is not None

    def test_fixed_noise_rewards_are_means(self, speller, sigmoid):
        sc = type(speller)(speller.scores, speller.probs, speller.success, speller.harm, "fixed")
        env = sc.to_environment()
        log = collect(env, sigmoid, 300, 1)
        assert np.array_equal(log.reward, env.reward_means[log.ctx, log.action])

    def test_sharding(self, ten_context_env):
        sch = RandomizationScheme()
        whole = collect(ten_context_env, sch, 1000, 99, chunk_size=128)
        parts = [collect(ten_context_env, sch, 250, 99, start=s) for s in range(0, 1000, 250)]
        assert ExplorationLog.concat(parts) == whole

    def test_context_frequencies(self):
        rng = np.random.default_rng(1)
        env = random_environment(3, 2, rng)
        log = collect(env, RandomizationScheme(), 60000, 5)
        freq = np.bincount(log.ctx, minlength=3) / len(log)
        assert np.allclose(freq, env.probs, atol=4 * np.sqrt(0.25 / len(log)))

    def test_sigmoid_needs_subset_env(self, two_by_two):
        with pytest.raises(DomainError):
            distribution_table(RandomizationScheme("sigmoid-subset"), two_by_two)


class TestCorrupt:
    def _log(self, k=2):
        return collect(_uniform_env(k), RandomizationScheme(), 100, 0)

    def test_identity(self):
        log = self._log()
        assert corrupt_propensities(log, 1.0) == log

    def test_scalar_fixed_point(self):
        log = self._log()
        with pytest.warns(UserWarning):
            out = corrupt_propensities(log, 1.2)
        assert out == log

    def test_per_action_map(self):
        log = self._log()
        out = corrupt_propensities(log, {Action.atomic(0): 1.2})
        exact = [Fraction(6, 10) / Fraction(11, 10), Fraction(5, 10) / Fraction(11, 10)]
        assert out.pvec_table[0].tolist() == pytest.approx([float(x) for x in exact], rel=1e-15)
        assert out.pvec_table[0, 0] == pytest.approx(0.5454545454545454)
        assert np.array_equal(out.action, log.action)
        assert np.all(out.propensity == out.pvec_table[0][out.action])

    def test_range_error(self):
        log = collect(_uniform_env(1), RandomizationScheme(), 10, 0)
        with pytest.raises(ValueError):
            corrupt_propensities(log, {0: 1.5})

    def test_no_vector_scales_p(self):
        recs = [ExplorationRecord(Context(0, (0.0,)), Action.atomic(0), 0.5, 1.0)]
        out = corrupt_propensities(recs, 1.2)
        assert out[0].propensity == pytest.approx(0.6)
        with pytest.raises(ValueError):
            corrupt_propensities(recs, 2.0)


class TestRecords:
    def test_propensity_must_be_positive(self):
        with pytest.raises(DataIntegrityError):
            ExplorationRecord(Context(0, (0.0,)), Action.atomic(0), 0.0, 1.0)

    def test_reward_range(self):
        with pytest.raises(DomainError):
            ExplorationRecord(Context(0, (0.0,)), Action.atomic(0), 0.5, 1.5)

    def test_roundtrip_through_records(self, ten_context_env):
        log = collect(ten_context_env, RandomizationScheme(), 50, 8)
        assert ExplorationLog.from_records(list(log)) == log

    def test_take_and_slice(self, ten_context_env):
        log = collect(ten_context_env, RandomizationScheme(), 50, 8)
        assert list(log[10:20]) == list(log)[10:20]
        assert log[-1] == list(log)[-1]
