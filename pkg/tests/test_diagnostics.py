import itertools
import math

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
    arithmetic_mean_test,
    collect,
    corrupt_propensities,
    generate_scenario,
    harmonic_mean_test,
    replay_verify,
    sweep,
)
from cfeval.diagnostics import harmonic_terms, hoeffding_radius
from cfeval.errors import DomainError, InsufficientDataError


def _uniform_log(k, n, seed):
    env = EnvironmentSpec([Context(0, (0.0,))], [1.0], np.full((1, k), 0.5))
    return collect(env, RandomizationScheme(), n, seed)


class TestArithmetic:
    def test_always_chosen(self):
        rec = ExplorationRecord(Context(0, (0.0,)), Action.atomic(0), 1.0, 1.0, 1, PropensityVector([1.0]))
        rep = arithmetic_mean_test([rec] * 5, Action.atomic(0))
        assert rep.statistic == rep.expected == 1.0 and rep.passed

    def test_radius(self):
        assert hoeffding_radius(10**5, 0.05) == pytest.approx(math.sqrt(math.log(40) / 2e5))
        assert hoeffding_radius(10**5, 0.05) == pytest.approx(0.0043, abs=5e-5)

    def test_clean_passes(self):
        rep = arithmetic_mean_test(_uniform_log(4, 10**5, 3), 0, 0.05)
        assert rep.passed and rep.expected == 0.25

    def test_corrupted_fails(self):
        log = corrupt_propensities(_uniform_log(4, 10**5, 3), {0: 1.2})
        rep = arithmetic_mean_test(log, 0, 0.05)
        assert not rep.passed
        assert rep.expected == pytest.approx(0.3 / 1.05)

    def test_needs_vector(self):
        rec = ExplorationRecord(Context(0, (0.0,)), Action.atomic(0), 0.5, 1.0)
        with pytest.raises(InsufficientDataError):
            arithmetic_mean_test([rec], 0)


class TestHarmonic:
    @pytest.mark.parametrize("a", [0, 1])
    def test_single_record(self, a):
        pv = PropensityVector([0.5, 0.5])
        rec = ExplorationRecord(Context(0, (0.0,)), Action.atomic(a), 0.5, 0.0, 1, pv)
        assert harmonic_mean_test([rec], 0).statistic == 2.0

    @given(st.floats(1e-6, 1 - 1e-6, exclude_min=True, exclude_max=True))
    def test_expectation_identity(self, p):
        # enumerate both outcomes weighted by their probabilities
        t = harmonic_terms(np.array([0, 1]), 0, np.array([p, p]))
        assert p * t[0] + (1 - p) * t[1] == pytest.approx(2.0, rel=1e-9)

    def test_undefined_at_one(self):
        rec = ExplorationRecord(Context(0, (0.0,)), Action.atomic(0), 1.0, 1.0, 1, PropensityVector([1.0]))
        with pytest.raises(DomainError):
            harmonic_mean_test([rec], 0)

    def test_band(self):
        rep = harmonic_mean_test(_uniform_log(4, 10**5, 1), 2)
        assert rep.passed
        assert rep.deviation_bound == pytest.approx(4 * hoeffding_radius(10**5, 0.05))

    def test_corrupted_sigmoid_fails(self):
        sch = RandomizationScheme("sigmoid-subset", lambda1=3.0)
        log = collect(generate_scenario(40, 3, seed=4).to_environment(), sch, 10**5, 2)
        bad = corrupt_propensities(log, {0: 1.2})
        assert harmonic_mean_test(log, 0).passed
        assert not harmonic_mean_test(bad, 0).passed


class TestReplay:
    def test_clean(self, speller, sigmoid):
        rep = replay_verify(collect(speller.to_environment(), sigmoid, 5000, 9))
        assert rep.passed and rep.statistic == 0

    def test_one_flip(self):
        log = _uniform_log(3, 200, 4)
        act = log.action.copy()
        act[17] = (act[17] + 1) % 3
        rep = replay_verify(log.replace(action=act, propensity=log.pvec_table[log.pvec_row, act]))
        assert rep.mismatched_records == (17,)

    def test_propensity_corruption(self, ten_context_env):
        log = collect(ten_context_env, RandomizationScheme(), 2000, 4)
        rep = replay_verify(corrupt_propensities(log, {1: 1.2}))
        assert rep.statistic > 0

    def test_needs_seed(self):
        rec = ExplorationRecord(Context(0, (0.0,)), Action.atomic(0), 0.5, 1.0, None, PropensityVector([0.5, 0.5]))
        with pytest.raises(InsufficientDataError):
            replay_verify([rec])

    def test_logged_p_mismatch(self):
        log = _uniform_log(2, 50, 0)
        p = log.propensity.copy()
        p[3] = 0.4
        assert replay_verify(log.replace(propensity=p)).mismatched_records == (3,)


class TestSweep:
    def test_clean_and_dirty(self):
        log = _uniform_log(4, 10**5, 8)
        assert all(r.passed for r in sweep(log))
        assert not all(r.passed for r in sweep(corrupt_propensities(log, {3: 1.2})))
        assert {r.alpha for r in sweep(log)} == {0.05 / 4}

    def test_report_json(self):
        rep = sweep(_uniform_log(2, 100, 0))[0]
        assert '"test_name": "arithmetic"' in rep.to_json()
