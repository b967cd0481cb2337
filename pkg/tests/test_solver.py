import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrrsched.solver import (
    AllocationProblem,
    FeasibilityQuery,
    InstanceTooLargeError,
    OddSumError,
    ProblemPacket,
    SolveResult,
    enumerate_subsets_pruned,
    ilp_exhaustive_oracle,
    lp2_grid_oracle,
    meets_threshold,
    partition_feasibility,
    solve_ilp_subset,
    solve_lp2,
)
from mrrsched.verify import random_ilp_instance, random_lp2_instance, subset_sum_dp


def pkt(id, w, l, rates, r_min):
    return ProblemPacket(id, w, l, np.asarray(rates, dtype=float), r_min)


class TestSolveIlpSubset:
    def test_single_packet_takes_all_rbs(self):
        res = solve_ilp_subset(AllocationProblem([pkt(0, 1, 1, [3, 4], 5)], 2))
        assert res.feasible
        np.testing.assert_array_equal(res.allocations[0], [1, 1])
        assert res.total_rr == pytest.approx(7)

    def test_capacity_contradiction(self):
        problem = AllocationProblem(
            [pkt(0, 1, 1, [4], 5), pkt(1, 1, 1, [4], 5)], 1)
        assert not solve_ilp_subset(problem).feasible

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(41)
        for _ in range(60):
            problem = random_ilp_instance(rng)
            got = solve_ilp_subset(problem)
            want = ilp_exhaustive_oracle(problem)
            assert got.feasible == want.feasible
            if got.feasible:
                assert got.total_rr == pytest.approx(want.total_rr, rel=1e-9)

    def test_zero_reward_packet_can_be_scheduled(self):
        res = solve_ilp_subset(AllocationProblem([pkt(0, 0, 1, [3, 4], 5)], 2))
        assert res.feasible and res.total_rr == 0


class TestExhaustiveOracle:
    def test_shares_examples_with_fast_path(self):
        res = ilp_exhaustive_oracle(AllocationProblem([pkt(0, 1, 1, [3, 4], 5)], 2))
        assert res.feasible and res.total_rr == pytest.approx(7)
        infeas = ilp_exhaustive_oracle(
            AllocationProblem([pkt(0, 1, 1, [4], 5), pkt(1, 1, 1, [4], 5)], 1))
        assert not infeas.feasible

    def test_reports_infeasible_only_when_no_assignment_works(self):
        # one packet, generous floor: the all-ones row is feasible
        res = ilp_exhaustive_oracle(AllocationProblem([pkt(0, 1, 1, [2, 2], 1)], 2))
        assert res.feasible

    def test_instance_bound(self):
        pkts = [pkt(i, 1, 1, np.ones(6), 1) for i in range(3)]
        with pytest.raises(InstanceTooLargeError):
            ilp_exhaustive_oracle(AllocationProblem(pkts, 6))


class TestEnumerateSubsetsPruned:
    def test_supersets_of_infeasible_never_submitted(self):
        submitted = []

        def spy(problem):
            submitted.append(tuple(p.id for p in problem.packets))
            return solve_ilp_subset(problem)

        eligible = [pkt(1, 1, 1, [2], 5), pkt(2, 1, 1, [2], 1)]
        enumerate_subsets_pruned(eligible, 2, spy, 1)
        assert (1,) in submitted and (1, 2) not in submitted

    def test_p1_equals_best_single_packet(self):
        eligible = [pkt(1, 1, 1, [4, 1], 2), pkt(2, 3, 1, [1, 2], 1)]
        res = enumerate_subsets_pruned(eligible, 1, solve_ilp_subset, 2)
        assert res.chosen == (2,)  # coef 3*(1+2)=9 beats 5

    def test_matches_unpruned_enumeration(self):
        import itertools
        rng = np.random.default_rng(42)
        for _ in range(40):
            problem = random_ilp_instance(rng, max_rbs=3, max_packets=3)
            for q in problem.packets:
                q.min_rate *= 0.8
            p = len(problem.packets)
            got = enumerate_subsets_pruned(problem.packets, p, solve_ilp_subset,
                                           problem.n_rbs)
            best = None
            for size in range(1, p + 1):
                for combo in itertools.combinations(problem.packets, size):
                    res = solve_ilp_subset(AllocationProblem(list(combo), problem.n_rbs))
                    if res.feasible and (best is None or res.total_rr > best):
                        best = res.total_rr
            if best is None:
                assert not got.feasible
            else:
                assert got.feasible
                assert got.total_rr == pytest.approx(best, rel=1e-9)

    def test_empty_when_no_singleton_feasible(self):
        eligible = [pkt(1, 1, 1, [2], 5), pkt(2, 1, 1, [2], 9)]
        res = enumerate_subsets_pruned(eligible, 2, solve_ilp_subset, 1)
        assert not res.feasible and res.chosen == ()

    def test_tie_broken_by_lexicographically_smallest_id_set(self):
        # both singletons achieve the same reward rate
        eligible = [pkt(4, 1, 1, [6], 1), pkt(2, 2, 2, [6], 1)]
        res = enumerate_subsets_pruned(eligible, 1, solve_ilp_subset, 1)
        assert res.chosen == (2,)


class TestSolveLp2:
    def test_one_rb_closed_form(self):
        res = solve_lp2(pkt(1, 2, 1, [10], 4), pkt(2, 1, 1, [10], 4), 1)
        assert res.feasible
        assert res.allocations[1][0] == pytest.approx(0.6, abs=1e-9)
        assert res.total_rr == pytest.approx(16, rel=1e-9)

    def test_two_rb_opposite_channels(self):
        res = solve_lp2(pkt(1, 1, 1, [10, 2], 5), pkt(2, 1, 1, [2, 10], 5), 2)
        assert res.feasible
        np.testing.assert_allclose(res.allocations[1], [1, 0], atol=1e-9)
        assert res.total_rr == pytest.approx(20, rel=1e-9)

    def test_unsatisfiable_single_constraint(self):
        res = solve_lp2(pkt(1, 1, 1, [1, 1], 5), pkt(2, 1, 1, [1, 1], 0.5), 2)
        assert not res.feasible

    def test_complement_allocation_returned_for_second_packet(self):
        res = solve_lp2(pkt(1, 2, 1, [10], 4), pkt(2, 1, 1, [10], 4), 1)
        np.testing.assert_allclose(res.allocations[1] + res.allocations[2], 1.0)

    def test_against_grid_oracle(self):
        rng = np.random.default_rng(43)
        for _ in range(60):
            p1, p2, n_rbs = random_lp2_instance(rng)
            got = solve_lp2(p1, p2, n_rbs)
            ref = lp2_grid_oracle(p1, p2, n_rbs, 0.01)
            if ref.feasible:
                if got.feasible:
                    tol = 1e-2 * max(abs(ref.total_rr), 1e-6)
                    assert got.total_rr >= ref.total_rr - tol

    def test_wider_instances_at_coarse_grid(self):
        rng = np.random.default_rng(44)
        for _ in range(15):
            p1, p2, n_rbs = random_lp2_instance(rng, rb_choices=(4, 5))
            got = solve_lp2(p1, p2, n_rbs)
            ref = lp2_grid_oracle(p1, p2, n_rbs, 0.1)
            if ref.feasible and got.feasible:
                assert got.total_rr >= ref.total_rr - 1e-9 * max(1, abs(ref.total_rr))

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_relaxation_dominates_integral_split(self, seed):
        rng = np.random.default_rng(seed)
        p1, p2, n_rbs = random_lp2_instance(rng)
        lp = solve_lp2(p1, p2, n_rbs)
        ilp = solve_ilp_subset(AllocationProblem([p1, p2], n_rbs))
        if lp.feasible and ilp.feasible:
            assert lp.total_rr >= ilp.total_rr - 1e-9 * max(1, abs(ilp.total_rr))


class TestGridOracle:
    def test_symmetric_example_within_one_step(self):
        res = lp2_grid_oracle(pkt(1, 2, 1, [10], 4), pkt(2, 1, 1, [10], 4), 1, 0.01)
        assert res.feasible
        assert res.allocations[1][0] == pytest.approx(0.6, abs=0.01 + 1e-12)

    def test_infeasible_instance(self):
        res = lp2_grid_oracle(pkt(1, 1, 1, [1], 5), pkt(2, 1, 1, [1], 0.2), 1, 0.01)
        assert not res.feasible

    def test_rejects_oversized(self):
        with pytest.raises(InstanceTooLargeError):
            lp2_grid_oracle(pkt(1, 1, 1, np.ones(6), 1),
                            pkt(2, 1, 1, np.ones(6), 1), 6, 0.1)


class TestPartitionFeasibility:
    @pytest.mark.parametrize("values,expected", [
        ([1, 1, 1, 1], True),
        ([3, 1, 1, 2, 2, 1], True),
        ([1, 1, 4], False),
    ])
    def test_known_sets(self, values, expected):
        assert partition_feasibility(values) is expected
        assert subset_sum_dp(values) is expected

    def test_odd_sum_rejected(self):
        with pytest.raises(OddSumError):
            partition_feasibility([1, 1, 1])

    def test_agrees_with_dp_on_random_sets(self):
        rng = np.random.default_rng(45)
        for _ in range(30):
            n = int(rng.integers(2, 11))
            while True:
                values = [int(v) for v in rng.integers(1, 51, n)]
                if sum(values) % 2 == 0:
                    break
            assert partition_feasibility(values) == subset_sum_dp(values)


class TestFeasibilityQuery:
    def test_threshold_query(self):
        problem = AllocationProblem([pkt(0, 1, 1, [3, 4], 5)], 2)
        assert meets_threshold(FeasibilityQuery(problem, 6.5))
        assert not meets_threshold(FeasibilityQuery(problem, 7.5))

    def test_negative_threshold_rejected(self):
        problem = AllocationProblem([pkt(0, 1, 1, [3], 1)], 1)
        with pytest.raises(ValueError):
            FeasibilityQuery(problem, -1.0)


class TestResultInvariants:
    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_feasible_results_satisfy_constraints(self, seed):
        rng = np.random.default_rng(seed)
        problem = random_ilp_instance(rng)
        res = solve_ilp_subset(problem)
        if not res.feasible:
            return
        load = np.zeros(problem.n_rbs)
        for p in problem.packets:
            x = res.allocations[p.id]
            assert set(np.unique(x)) <= {0.0, 1.0}
            assert float(x @ p.rates) >= p.min_rate - 1e-9
            load += x
        assert np.all(load <= 1)
