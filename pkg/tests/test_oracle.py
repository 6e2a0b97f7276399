import math
import random

import pytest

from conftest import random_and_instance, random_selection
from mqoselect import (
    Budget,
    CspInstance,
    KnapsackInstance,
    astar,
    exhaustive,
    fixture,
    fixture_labels,
    greedy,
    iterative_flip,
    knapsack_dp,
    knapsack_reduction,
    local_search,
    random_sampling,
    reuse_oracle,
    topk,
)
from mqoselect.errors import ResourceLimitError
from mqoselect.oracle import brute_force_select, enumerate_flows


class TestBruteForce:
    def test_fig7_unique_optimum(self):
        inst = fixture("fig7")
        L = fixture_labels(inst)
        result = brute_force_select(inst)
        assert result.optimum == 94
        assert result.optimal_selections == ((L["c1"], L["c2"]),)
        # c3 never fits the 30 budget, so enumeration covers {c1, c2} only
        assert result.evaluations == 4

    def test_unbounded_budget_selects_all_benefit(self):
        for seed in range(8):
            base = random_and_instance(seed)
            inst = CspInstance.build(base.forest, base.expense, Budget(math.inf))
            result = brute_force_select(inst)
            assert result.optimum == pytest.approx(
                inst.benefit(inst.candidates), abs=1e-9
            )

    def test_knapsack_matches_dp(self):
        rng = random.Random(50)
        for _ in range(10):
            n = rng.randint(1, 10)
            k = KnapsackInstance(
                tuple(rng.randint(1, 20) for _ in range(n)),
                tuple(rng.randint(1, 10) for _ in range(n)),
                rng.randint(1, 25),
            )
            inst = knapsack_reduction(k)
            assert brute_force_select(inst).optimum == knapsack_dp(k)

    def test_cap(self):
        from mqoselect.instances import GeneratorConfig, random_forest

        inst = random_forest(GeneratorConfig(n_eq=(14, 14), seed=1))
        with pytest.raises(ResourceLimitError):
            brute_force_select(inst, cap=3)


class TestEnumerateFlows:
    def test_fig7(self):
        inst = fixture("fig7")
        L = fixture_labels(inst)
        counts = enumerate_flows(inst.forest, {L["c1"], L["c2"]})
        assert counts == {L["c1"]: 1, L["c2"]: 1}

    def test_empty_selection(self):
        inst = fixture("fig7")
        assert enumerate_flows(inst.forest, frozenset()) == {}

    def test_matches_oracle_counts(self):
        rng = random.Random(31)
        for seed in range(20):
            inst = random_and_instance(seed)
            z = random_selection(rng, inst.candidates)
            assert enumerate_flows(inst.forest, z) == reuse_oracle(
                inst.forest, z, inst.cost
            ).n_reuses


class TestGlobalSoundness:
    def test_no_algorithm_beats_the_oracle(self):
        runs = []
        fig7 = fixture("fig7")
        runs.append((fig7, exhaustive(fig7)))
        runs.append((fig7, astar(fig7)))
        runs.append((fig7, greedy(fig7)))
        runs.append((fig7, topk(fig7, "total_utility", 2)))
        runs.append((fig7, random_sampling(fig7, trials=60, seed=3)))
        runs.append((fig7, local_search(fig7, "II", {"restarts": 2}, seed=3)))
        runs.append((fig7, local_search(fig7, "SA", {"max_evals": 150}, seed=3)))
        runs.append((fig7, iterative_flip(fig7, iterations=60, seed=3)))
        for seed in range(6):
            inst = random_and_instance(seed, max_eq=10)
            runs.append((inst, greedy(inst)))
            runs.append((inst, random_sampling(inst, trials=40, seed=seed)))
            runs.append((inst, iterative_flip(inst, iterations=40, seed=seed)))
        for inst, report in runs:
            optimum = brute_force_select(inst).optimum
            assert report.benefit <= optimum + 1e-9
            assert report.feasible
