import numpy as np
import pytest

from testdrive.core import Label
from testdrive.errors import ConfigError, SessionError
from testdrive.grouptest import (GroupTestConfig, GroupTestRun,
                                 estimate_prevalence, false_negative_count)

YES, NO = Label(1), Label(0)


class TestEstimatePrevalence:
    def test_all_pools_positive(self):
        assert estimate_prevalence(7, 7, 3) == 1.0

    def test_s1_reduces_to_proportion(self):
        assert estimate_prevalence(5, 50, 1) == pytest.approx(0.1, abs=1e-15)

    def test_paper_formula_value(self):
        got = estimate_prevalence(2, 100, 2)
        assert abs(got - (1.0 - 0.98 ** 0.5)) <= 1e-9

    def test_zero_positives(self):
        assert estimate_prevalence(0, 10, 2) == 0.0

    def test_validation(self):
        with pytest.raises(ConfigError):
            estimate_prevalence(1, 0, 2)
        with pytest.raises(ConfigError):
            estimate_prevalence(5, 3, 2)
        with pytest.raises(ConfigError):
            estimate_prevalence(1, 5, 0)

    def test_monotonicity_grid(self):
        for s in (1, 2, 3):
            for T in range(11, 21):
                vals = [estimate_prevalence(n, T, s) for n in range(1, 11)]
                assert all(b > a for a, b in zip(vals, vals[1:]))
            for n in (1, 4, 8):
                vals = [estimate_prevalence(n, T, s) for T in range(n + 1, n + 11)]
                assert all(b < a for a, b in zip(vals, vals[1:]))


class TestFalseNegativeCount:
    def test_values(self):
        assert false_negative_count(0.0, 5000) == 0
        assert false_negative_count(0.01, 5000) == 50
        assert false_negative_count(1.0, 123) == 123

    def test_rounds_to_nearest(self):
        assert false_negative_count(0.5, 3) == 2  # 1.5 rounds up
        assert false_negative_count(0.4, 3) == 1

    def test_validation(self):
        with pytest.raises(ConfigError):
            false_negative_count(1.5, 10)


class TestGroupTestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            GroupTestConfig(s=0)
        with pytest.raises(ConfigError):
            GroupTestConfig(n=0)
        with pytest.raises(ConfigError):
            GroupTestConfig(n=5, max_pools=3)


class TestGroupTestRun:
    def test_stops_at_n_positives(self):
        run = GroupTestRun(100, GroupTestConfig(s=2, n=2, seed=0))
        for answer in (NO, YES, NO, YES):
            assert run.next_pool() is not None
            run.record_answer(answer)
        assert run.stopped
        st = run.state
        assert (st.T, st.positives) == (4, 2)
        est = run.estimate()
        assert est.p_hat == pytest.approx(estimate_prevalence(2, 4, 2))
        assert not est.exhausted

    def test_immediate_positives(self):
        run = GroupTestRun(10, GroupTestConfig(s=2, n=2, seed=1))
        run.next_pool(); run.record_answer(YES)
        run.next_pool(); run.record_answer(YES)
        assert run.stopped
        assert run.estimate().p_hat == 1.0

    def test_supply_exhaustion(self):
        run = GroupTestRun(4, GroupTestConfig(s=2, n=2, seed=2))
        run.next_pool(); run.record_answer(NO)
        run.next_pool(); run.record_answer(NO)
        assert run.next_pool() is None
        assert run.stopped
        est = run.estimate()
        assert est.exhausted and est.p_hat == 0.0

    def test_pool_cap(self):
        run = GroupTestRun(100, GroupTestConfig(s=2, n=2, seed=3, max_pools=3))
        for _ in range(3):
            run.next_pool()
            run.record_answer(NO)
        assert run.stopped
        est = run.estimate()
        assert est.exhausted and est.T == 3

    def test_exhausted_when_stopped_short_of_n(self):
        run = GroupTestRun(100, GroupTestConfig(s=2, n=2, seed=4, max_pools=2))
        run.next_pool(); run.record_answer(YES)
        run.next_pool(); run.record_answer(NO)
        est = run.estimate()
        assert est.exhausted
        assert est.p_hat == pytest.approx(estimate_prevalence(1, 2, 2))

    def test_zero_pools_estimate(self):
        run = GroupTestRun(10, GroupTestConfig())
        est = run.estimate()
        assert est.p_hat == 0.0 and est.exhausted and est.T == 0

    def test_pending_pool_idempotent(self):
        run = GroupTestRun(50, GroupTestConfig(seed=5))
        a = run.next_pool()
        assert run.next_pool() == a
        run.record_answer(NO)
        assert run.next_pool() != a

    def test_answer_without_pool(self):
        run = GroupTestRun(50, GroupTestConfig())
        with pytest.raises(SessionError, match="no pool outstanding"):
            run.record_answer(NO)

    def test_answer_after_stop(self):
        run = GroupTestRun(50, GroupTestConfig(s=2, n=1, seed=6))
        run.next_pool()
        run.record_answer(YES)
        with pytest.raises(SessionError):
            run.record_answer(NO)
        with pytest.raises(SessionError):
            run.next_pool()

    def test_without_replacement(self):
        for seed in range(5):
            run = GroupTestRun(30, GroupTestConfig(s=3, n=99, seed=seed,
                                                   max_pools=99))
            seen = []
            while (pool := run.next_pool()) is not None:
                seen.extend(pool)
                run.record_answer(NO)
                if run.stopped:
                    break
            assert len(seen) == len(set(seen))

    def test_deterministic_sequence(self):
        def sequence(seed):
            run = GroupTestRun(40, GroupTestConfig(s=2, n=5, seed=seed))
            pools = []
            for _ in range(5):
                pools.append(run.next_pool())
                run.record_answer(NO)
            return pools
        assert sequence(7) == sequence(7)
        assert sequence(7) != sequence(8)

    def test_first_pool_uniform(self):
        n = 10
        counts = np.zeros(n)
        runs = 4000
        for seed in range(runs):
            run = GroupTestRun(n, GroupTestConfig(s=2, seed=seed))
            for pid in run.next_pool():
                counts[pid] += 1
        p = 2 / n
        sigma = np.sqrt(p * (1 - p) / runs)
        assert np.all(np.abs(counts / runs - p) <= 3.5 * sigma)


def simulate_p_hat(p, s, n, seed):
    """Sequential pools with i.i.d. member positivity p; returns Eq-style
    estimate after the n-th positive pool."""
    rng = np.random.default_rng(seed)
    q = 1.0 - (1.0 - p) ** s
    # T = sum of n geometric waiting times.
    T = int(rng.geometric(q, size=n).sum())
    return estimate_prevalence(n, T, s)


class TestConsistency:
    def test_mean_near_truth_smoke(self):
        p = 0.05
        est = [simulate_p_hat(p, 2, 20, seed) for seed in range(300)]
        assert abs(np.mean(est) - p) <= 0.15 * p

    def test_small_n_noisier(self):
        v2 = np.var([simulate_p_hat(0.05, 2, 2, s) for s in range(300)])
        v20 = np.var([simulate_p_hat(0.05, 2, 20, s) for s in range(300)])
        assert v2 > v20
