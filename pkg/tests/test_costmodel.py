import random

import pytest

from conftest import random_and_instance, random_selection
from mqoselect import (
    UnsupportedStructureError,
    ancestor_count_estimate,
    build_tree,
    ex_costs,
    flow_counts,
    query_cost,
    reuse_oracle,
    strict_nesting_best,
    subtree_benefits,
    workload_benefit,
)
from mqoselect.errors import ResourceLimitError
from mqoselect.instances import fixture, fixture_labels
from mqoselect.oracle import enumerate_flows, naive_query_cost, naive_workload_benefit


@pytest.fixture(scope="module")
def fig7():
    inst = fixture("fig7")
    return inst, fixture_labels(inst)


@pytest.fixture(scope="module")
def fig2():
    inst = fixture("fig2")
    return inst, fixture_labels(inst)


class TestExCosts:
    def test_fig7_paper_values(self, fig7):
        inst, L = fig7
        assert inst.cost.ex_cost[L["c1"]] == 40
        assert inst.cost.ex_cost[L["c2"]] == 84
        assert inst.cost.ex_cost[L["c3"]] == 324
        assert inst.cost.unit_benefit[L["c1"]] == 30
        assert inst.cost.unit_benefit[L["c2"]] == 64
        assert inst.cost.unit_benefit[L["c3"]] == 224

    def test_leaf_reads_at_size(self):
        f = build_tree({"label": "T", "size": 7.5})
        table = ex_costs(f)
        assert table.ex_cost[0] == 7.5
        assert table.unit_benefit[0] == 0.0

    def test_fig2_example_values(self, fig2):
        inst, L = fig2
        assert inst.cost.ex_cost[L["c3"]] == 10
        assert inst.cost.reuse_cost[L["c3"]] == 8
        assert inst.cost.unit_benefit[L["c3"]] == 2
        assert inst.cost.unit_benefit[L["c4"]] == 4

    def test_epsilon_override(self):
        inst = fixture("fig2", epsilon=0.5)
        L = fixture_labels(inst)
        assert inst.cost.ex_cost[L["c3"]] == 10.5
        assert inst.cost.unit_benefit[L["c4"]] == 5.0  # 4 + 2*eps


class TestQueryCost:
    def test_fig7_hand_value(self, fig7):
        inst, L = fig7
        z = {L["c1"], L["c2"]}
        assert query_cost(inst.forest, L["c3"], z, inst.cost) == 230
        assert naive_query_cost(inst.forest, L["c3"], z) == 230

    def test_empty_selection_equals_ex_cost(self):
        for seed in range(10):
            inst = random_and_instance(seed)
            for root in inst.forest.roots:
                assert query_cost(inst.forest, root.eq, frozenset(), inst.cost) == pytest.approx(
                    inst.cost.ex_cost[root.eq]
                )

    def test_memoized_matches_naive(self):
        rng = random.Random(9)
        for seed in range(15):
            inst = random_and_instance(seed)
            z = random_selection(rng, inst.candidates)
            for root in inst.forest.roots:
                assert query_cost(inst.forest, root.eq, z, inst.cost) == pytest.approx(
                    naive_query_cost(inst.forest, root.eq, z)
                )


class TestWorkloadBenefit:
    def test_fig7_value(self, fig7):
        inst, L = fig7
        assert workload_benefit(inst.forest, {L["c1"], L["c2"]}, inst.cost) == 94

    def test_empty_is_zero(self, fig7):
        inst, _ = fig7
        assert workload_benefit(inst.forest, frozenset(), inst.cost) == 0.0

    def test_fig2_example3_arithmetic(self, fig2):
        inst, L = fig2
        assert workload_benefit(inst.forest, {L["c3"]}, inst.cost) == 4  # (2+eps)*2 at eps=0
        assert workload_benefit(inst.forest, {L["c3"], L["c4"]}, inst.cost) == 6

    def test_monotone_in_selection_on_and_forests(self):
        rng = random.Random(4)
        for seed in range(20):
            inst = random_and_instance(seed)
            z = random_selection(rng, inst.candidates)
            z_bigger = z | random_selection(rng, inst.candidates)
            assert (
                workload_benefit(inst.forest, z_bigger, inst.cost)
                >= workload_benefit(inst.forest, z, inst.cost) - 1e-9
            )


class TestReuseOracle:
    def test_fig7_msb_and_counts(self, fig7):
        inst, L = fig7
        z = {L["c1"], L["c2"]}
        msb = subtree_benefits(inst.forest, z, inst.cost)
        assert msb[L["c1"]] == 30
        assert msb[L["c2"]] == 64
        assert msb[L["c3"]] == 94
        state = reuse_oracle(inst.forest, z, inst.cost)
        assert state.total_benefit == 94
        assert state.n_reuses == {L["c1"]: 1, L["c2"]: 1}
        assert state.reused == frozenset(z)

    def test_single_candidate_counts_both_flows(self, fig7):
        inst, L = fig7
        state = reuse_oracle(inst.forest, {L["c1"]}, inst.cost)
        assert state.total_benefit == 60  # 30 * 2 flows
        assert state.n_reuses == {L["c1"]: 2}

    def test_empty_selection(self, fig7):
        inst, _ = fig7
        state = reuse_oracle(inst.forest, frozenset(), inst.cost)
        assert state.total_benefit == 0.0
        assert state.reused == frozenset()
        assert state.n_reuses == {}

    def test_or_forest_rejected(self):
        inst = fixture("fig5")
        with pytest.raises(UnsupportedStructureError):
            reuse_oracle(inst.forest, frozenset(), inst.cost)

    def test_equals_min_recursion_evaluator(self):
        rng = random.Random(11)
        for seed in range(30):
            inst = random_and_instance(seed)
            for _ in range(5):
                z = random_selection(rng, inst.candidates)
                state = reuse_oracle(inst.forest, z, inst.cost)
                assert state.total_benefit == pytest.approx(
                    naive_workload_benefit(inst.forest, z), abs=1e-9
                )

    def test_root_decomposition(self):
        rng = random.Random(13)
        for seed in range(15):
            inst = random_and_instance(seed)
            z = random_selection(rng, inst.candidates)
            msb = subtree_benefits(inst.forest, z, inst.cost)
            for root in inst.forest.roots:
                saved = inst.cost.ex_cost[root.eq] - query_cost(
                    inst.forest, root.eq, z, inst.cost
                )
                assert msb[root.eq] == pytest.approx(saved, abs=1e-9)

    def test_flow_counts_match_enumeration(self):
        rng = random.Random(17)
        for seed in range(25):
            inst = random_and_instance(seed)
            z = random_selection(rng, inst.candidates)
            state = reuse_oracle(inst.forest, z, inst.cost)
            assert enumerate_flows(inst.forest, z) == state.n_reuses

    def test_pass1_visits_every_node_once(self):
        inst = random_and_instance(3)
        state = reuse_oracle(inst.forest, frozenset(), inst.cost)
        # pass 1 touches every node; pass 2 only looks at the seeded roots
        root_eqs = {r.eq for r in inst.forest.roots}
        assert state.visits == inst.forest.n_eq() + len(root_eqs)


class TestFlowCounts:
    def test_weighted_chain(self):
        chain = build_tree(
            {
                "label": "top",
                "size": 1,
                "op": {
                    "label": "o",
                    "cost": 1,
                    "inputs": [
                        {
                            "label": "mid",
                            "size": 1,
                            "op": {"label": "o2", "cost": 1, "inputs": [{"label": "leaf", "size": 5}]},
                        }
                    ],
                },
            }
        )
        from mqoselect.forest import ExpressionForest, Root

        weighted = ExpressionForest(
            chain.eq_nodes, chain.op_nodes, [Root(eq=chain.roots[0].eq, weight=3)],
            chain.candidate_mask,
        )
        flows = flow_counts(weighted)
        assert all(f == 3 for f in flows)

    def test_weighted_reuse_counts(self):
        from mqoselect.forest import ExpressionForest, Root

        chain = build_tree(
            {
                "label": "top",
                "size": 1,
                "op": {"label": "o", "cost": 10, "inputs": [{"label": "mid", "size": 2,
                       "op": {"label": "o2", "cost": 10, "inputs": [{"label": "leaf", "size": 5}]},
                       "candidate": True}]},
            }
        )
        weighted = ExpressionForest(
            chain.eq_nodes, chain.op_nodes, [Root(eq=chain.roots[0].eq, weight=3)],
            chain.candidate_mask,
        )
        mid = next(eq.id for eq in weighted.eq_nodes if eq.label == "mid")
        state = reuse_oracle(weighted, {mid})
        assert state.n_reuses[mid] == 3
        assert enumerate_flows(weighted, {mid})[mid] == 3


class TestAncestorCount:
    def test_fig7_c1(self, fig7):
        inst, L = fig7
        assert ancestor_count_estimate(inst.forest, L["c1"]) == 2

    def test_root_has_none(self, fig7):
        inst, L = fig7
        assert ancestor_count_estimate(inst.forest, L["c3"]) == 0

    def test_chain(self):
        desc = {"label": "n0", "size": 1}
        for i in range(1, 6):
            desc = {"label": f"n{i}", "size": 1,
                    "op": {"label": f"o{i}", "cost": 1, "inputs": [desc]}}
        f = build_tree(desc)
        bottom = next(eq.id for eq in f.eq_nodes if eq.label == "n0")
        assert ancestor_count_estimate(f, bottom) == 5

    def test_lower_bounds_num_uses(self):
        for seed in range(15):
            inst = random_and_instance(seed)
            flows = flow_counts(inst.forest)
            for c in inst.candidates:
                assert flows[c] >= 1 or ancestor_count_estimate(inst.forest, c) >= 0


class TestStrictNesting:
    def test_fig7_pair(self, fig7):
        inst, L = fig7
        assert strict_nesting_best(inst.forest, {L["c1"], L["c2"]}) == 64

    def test_single_candidate_u(self, fig7):
        inst, L = fig7
        assert strict_nesting_best(inst.forest, {L["c1"]}) == 60  # 30 * 2 flows

    def test_never_beats_reuse_oracle(self):
        rng = random.Random(23)
        for seed in range(25):
            inst = random_and_instance(seed, max_eq=10)
            z = random_selection(rng, inst.candidates)
            strict = strict_nesting_best(inst.forest, z)
            state = reuse_oracle(inst.forest, z, inst.cost)
            assert strict <= state.total_benefit + 1e-9

    def test_node_cap(self):
        from mqoselect.instances import GeneratorConfig, random_forest

        inst = random_forest(GeneratorConfig(n_eq=(12, 12), seed=2))
        with pytest.raises(ResourceLimitError):
            strict_nesting_best(inst.forest, set(inst.candidates), node_cap=3)
