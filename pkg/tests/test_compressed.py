import random

import pytest

from conftest import naive_compressed_edges, random_and_instance
from mqoselect import compress, compressed_add, compressed_remove
from mqoselect.instances import fixture, fixture_labels


@pytest.fixture
def fig8():
    inst = fixture("fig8")
    return inst.forest, fixture_labels(inst)


class TestCompress:
    def test_fig8_selected_chains(self, fig8):
        forest, L = fig8
        cf = compress(forest, {L["c1"], L["c6"], L["c7"], L["c8"]})
        assert cf.edge_set() == {(L["c8"], L["c1"]), (L["c7"], L["c6"])}

    def test_empty_selection(self, fig8):
        forest, _ = fig8
        cf = compress(forest, set())
        assert cf.edge_set() == frozenset()
        assert cf.roots() == []

    def test_all_candidates_equals_definition(self):
        for seed in range(20):
            forest = random_and_instance(seed).forest
            selected = set(forest.candidate_mask)
            cf = compress(forest, selected)
            assert cf.edge_set() == naive_compressed_edges(forest, selected)

    def test_unknown_id_rejected(self, fig8):
        forest, _ = fig8
        with pytest.raises(ValueError):
            compress(forest, {99})


class TestAddRemove:
    def test_fig9_add_c4(self, fig8):
        forest, L = fig8
        cf = compress(forest, {L["c1"], L["c6"], L["c7"], L["c8"]})
        compressed_add(cf, L["c4"])
        assert (L["c8"], L["c4"]) in cf.edge_set()
        assert (L["c4"], L["c1"]) in cf.edge_set()
        assert (L["c8"], L["c1"]) not in cf.edge_set()

    def test_fig9_remove_c8_after_add(self, fig8):
        forest, L = fig8
        cf = compress(forest, {L["c1"], L["c6"], L["c7"], L["c8"]})
        compressed_add(cf, L["c4"])
        compressed_remove(cf, L["c8"])
        assert cf.parents[L["c4"]] == set()
        assert cf.children[L["c4"]] == {L["c1"]}

    def test_add_to_empty(self, fig8):
        forest, L = fig8
        cf = compress(forest, set())
        compressed_add(cf, L["c4"])
        assert cf.selected == {L["c4"]}
        assert cf.edge_set() == frozenset()

    def test_remove_only_node(self, fig8):
        forest, L = fig8
        cf = compress(forest, {L["c4"]})
        compressed_remove(cf, L["c4"])
        assert cf.selected == set()
        assert cf.edge_set() == frozenset()

    def test_double_add_rejected(self, fig8):
        forest, L = fig8
        cf = compress(forest, {L["c4"]})
        with pytest.raises(ValueError):
            compressed_add(cf, L["c4"])

    def test_remove_unselected_rejected(self, fig8):
        forest, L = fig8
        cf = compress(forest, {L["c4"]})
        with pytest.raises(ValueError):
            compressed_remove(cf, L["c1"])

    def test_interleaved_ops_match_recompute(self):
        for seed in range(15):
            forest = random_and_instance(seed).forest
            candidates = sorted(forest.candidate_mask)
            if not candidates:
                continue
            rng = random.Random(seed + 77)
            cf = compress(forest, set())
            selected: set[int] = set()
            for _ in range(200):
                if selected and (rng.random() < 0.5 or len(selected) == len(candidates)):
                    victim = rng.choice(sorted(selected))
                    cf.remove(victim)
                    selected.discard(victim)
                else:
                    extra = rng.choice([c for c in candidates if c not in selected])
                    cf.add(extra)
                    selected.add(extra)
                assert cf.edge_set() == naive_compressed_edges(forest, selected)

    def test_add_touches_linearly(self, fig8):
        forest, L = fig8
        cf = compress(forest, {L["c1"], L["c6"], L["c7"], L["c8"]})
        compressed_add(cf, L["c4"])
        assert cf.last_op_touched <= 4 + 1  # |selected| + the new node
