import numpy as np
import pytest

from conftest import brute_force_optimum, make_instance, random_instance
from spectrumauction.exact import BudgetExceededError, solve_ip_exact
from spectrumauction.model import build_conflict_structure, check_allocation
from spectrumauction.relaxation import solve_lp2


class TestExamples:
    def test_two_conflicting_one_channel(self):
        inst = make_instance([(40, 50, 3.0, 0, 20), (60, 50, 5.0, 10, 20)])
        alloc = solve_ip_exact(inst, [3.0, 5.0])
        assert alloc.assignment == [None, 0]
        assert alloc.weight == pytest.approx(5.0)

    def test_two_channels_both_win(self):
        inst = make_instance(
            [(40, 50, 3.0, 0, 20), (60, 50, 5.0, 10, 20)],
            channels=((30.0, (50.0, 50.0), 80.0), (30.0, (50.0, 50.0), 80.0)),
        )
        alloc = solve_ip_exact(inst, [3.0, 5.0])
        assert sorted(j for j in alloc.assignment if j is not None) == [0, 1]
        assert alloc.weight == pytest.approx(8.0)

    def test_ineligible_never_assigned(self):
        inst = make_instance(
            [(5, 5, 9.0, 0, 10)], channels=((30.0, (90.0, 90.0), 20.0),)
        )
        alloc = solve_ip_exact(inst, [9.0])
        assert alloc.assignment == [None]
        assert alloc.weight == 0.0

    def test_budget_exceeded(self, rng):
        inst = random_instance(rng, n=8, m=2)
        with pytest.raises(BudgetExceededError):
            solve_ip_exact(inst, [r.bid for r in inst.requests], node_budget=5)


class TestAgainstBruteForce:
    def test_matches_exhaustive_enumeration(self, rng):
        for trial in range(30):
            n = int(rng.integers(2, 7))
            m = int(rng.integers(1, 3))
            inst = random_instance(rng, n=n, m=m)
            weights = [r.bid for r in inst.requests]
            alloc = solve_ip_exact(inst, weights)
            expected = brute_force_optimum(inst, weights)
            assert alloc.weight == pytest.approx(expected, abs=1e-9), f"trial {trial}"

    def test_output_is_feasible(self, rng):
        for _ in range(20):
            inst = random_instance(rng, n=6, m=2)
            s = build_conflict_structure(inst)
            alloc = solve_ip_exact(inst, [r.bid for r in inst.requests], structure=s)
            assert check_allocation(inst, s, alloc.assignment) == []
            for i in alloc.schedule:
                assert list(s.window_slices(i, alloc.assignment[i])) == alloc.schedule[i]


class TestRelaxationDominance:
    def test_lp_at_least_ip(self, rng):
        for _ in range(25):
            inst = random_instance(rng, n=int(rng.integers(2, 8)), m=2)
            weights = [r.bid for r in inst.requests]
            lp_value = solve_lp2(inst, weights).weight
            ip_value = solve_ip_exact(inst, weights).weight
            assert lp_value >= ip_value - 1e-9
