"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as the
criteria complete. Every tolerance and time limit is pinned here.
"""

import math
import random
import statistics
import time
from contextlib import contextmanager

import pytest

from conftest import naive_compressed_edges, random_and_instance, random_selection
from mqoselect import (
    KnapsackInstance,
    astar,
    compress,
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
    strict_nesting_best,
)
from mqoselect.cli import main as cli_main, report_text, run_algorithm
from mqoselect.errors import ResourceLimitError
from mqoselect.forest import EqNode, ExpressionForest, OpNode, Root
from mqoselect.instances import (
    GeneratorConfig,
    knapsack_optimal_sets,
    random_forest,
)
from mqoselect.oracle import brute_force_select, enumerate_flows, naive_workload_benefit


@contextmanager
def criterion(number: int, limit_s: float, description: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number}: FAIL — {description}")
        raise
    elapsed = time.perf_counter() - start
    assert elapsed < limit_s, f"criterion {number} took {elapsed:.1f}s (limit {limit_s}s)"
    print(f"ACCEPTANCE {number}: PASS ({elapsed:.2f}s) — {description}")


def test_criterion_1_example_exactness():
    with criterion(1, 1.0, "fig7 exactness: 94/{c1,c2} for all solvers, strict oracle 64"):
        inst = fixture("fig7")
        L = fixture_labels(inst)
        expected = (L["c1"], L["c2"])
        for report in (exhaustive(inst), astar(inst), greedy(inst)):
            assert report.benefit == 94
            assert report.selection == expected
        for seed in range(5):
            report = iterative_flip(inst, iterations=200, seed=seed)
            assert report.benefit == 94
            assert report.selection == expected
        assert strict_nesting_best(inst.forest, set(expected)) == 64


def test_criterion_2_benefit_decomposition_identity():
    with criterion(
        2, 30.0, "Eq-decomposition identity and flow counts on 500x20 random cases"
    ):
        rng = random.Random(20_2020)
        for i in range(500):
            inst = random_and_instance(10_000 + i, max_eq=12)
            for _ in range(20):
                z = random_selection(rng, inst.candidates)
                state = reuse_oracle(inst.forest, z, inst.cost)
                direct = naive_workload_benefit(inst.forest, z)
                assert abs(state.total_benefit - direct) <= 1e-9
                assert enumerate_flows(inst.forest, z) == state.n_reuses


def test_criterion_3_knapsack_reduction():
    with criterion(3, 60.0, "knapsack reduction: exact DP agreement on 200 instances"):
        rng = random.Random(33)
        for _ in range(200):
            n = rng.randint(1, 12)
            k = KnapsackInstance(
                values=tuple(rng.randint(1, 20) for _ in range(n)),
                weights=tuple(rng.randint(1, 10) for _ in range(n)),
                capacity=rng.randint(1, 40),
            )
            inst = knapsack_reduction(k)
            report = exhaustive(inst)
            assert report.benefit == knapsack_dp(k)
            items = set()
            for c in report.selection:
                label = inst.forest.eq_nodes[c].label
                assert label.startswith("sigma")  # joins never fit the budget
                items.add(int(label.removeprefix("sigma")) - 1)
            assert len(items) == len(report.selection)  # bijective mapping
            assert frozenset(items) in knapsack_optimal_sets(k)


def test_criterion_4_astar_exactness_and_pruning():
    with criterion(4, 120.0, "A* equals exhaustive; prunes on >= 90% of 100 instances"):
        pruned = 0
        total = 0
        seed = 40_000
        while total < 100:
            seed += 1
            inst = random_and_instance(seed, max_eq=15)
            if len(inst.candidates) > 14:
                continue
            total += 1
            a = astar(inst)
            b = exhaustive(inst)
            assert abs(a.benefit - b.benefit) <= 1e-9
            if a.extras["expanded"] < b.iterations:  # exhaustive's subset count
                pruned += 1
        assert pruned >= 0.9 * total, f"pruned on only {pruned}/{total}"


def test_criterion_5_greedy_quality(tmp_path):
    with criterion(5, 60.0, "greedy >= 0.63x optimum on every one of 200 instances"):
        for i in range(200):
            inst = random_and_instance(50_000 + i, max_eq=12)
            optimum = brute_force_select(inst).optimum
            got = greedy(inst).benefit
            if got < 0.63 * optimum - 1e-9:
                dump = tmp_path / f"criterion5_violation_{50_000 + i}.json"
                dump.write_text(inst.forest.to_canonical_text())
                raise AssertionError(
                    f"greedy {got} < 0.63 * {optimum} on seed {50_000 + i}; "
                    f"instance serialized to {dump}"
                )


def _antichain_forest(width: int) -> ExpressionForest:
    """One query over `width` independent filtered tables; the filter
    outputs form an antichain of candidates."""
    eq = []
    ops = []
    filtered = []
    for i in range(width):
        leaf_id = len(eq)
        eq.append(EqNode(id=leaf_id, label=f"t{i}", size=10))
        out_id = len(eq)
        op_id = len(ops)
        ops.append(OpNode(id=op_id, label=f"f{i}", cost=1, inputs=(leaf_id,), output=out_id))
        eq.append(EqNode(id=out_id, label=f"s{i}", size=2, producers=(op_id,)))
        filtered.append(out_id)
    root_id = len(eq)
    op_id = len(ops)
    ops.append(OpNode(id=op_id, label="all", cost=1, inputs=tuple(filtered), output=root_id))
    eq.append(EqNode(id=root_id, label="q", size=1, producers=(op_id,)))
    return ExpressionForest(eq, ops, [Root(eq=root_id)], set(filtered))


def test_criterion_6_linear_stats_step():
    with criterion(
        6, 120.0, "stats step scales linearly (slope 1.0 +- 0.1); strict oracle blows up"
    ):
        sizes = [1_000, 10_000, 100_000]
        points = []
        for n in sizes:
            inst = random_forest(
                GeneratorConfig(n_eq=(n, n), or_prob=0.0, budget_fraction=0.4, seed=n)
            )
            iterations = 3
            report = iterative_flip(inst, iterations=iterations, seed=0)
            points.append((math.log(n), math.log(report.extras["oracle_visits"] / iterations)))
        xm = sum(x for x, _ in points) / len(points)
        ym = sum(y for _, y in points) / len(points)
        slope = sum((x - xm) * (y - ym) for x, y in points) / sum(
            (x - xm) ** 2 for x, _ in points
        )
        assert abs(slope - 1.0) <= 0.1, f"log-log slope {slope}"

        # strict-nesting brute force: doubling growth on antichains, hard cap at 20 nodes
        steps = {}
        for width in (6, 9):
            forest = _antichain_forest(width)
            stats: dict = {}
            strict_nesting_best(forest, set(forest.candidate_mask), stats=stats)
            steps[width] = stats["steps"]
        assert steps[9] >= 6 * steps[6]  # ~2^3 vs a polynomial's ~(9/6)^k
        big = _antichain_forest(10)  # 21 eq nodes
        with pytest.raises(ResourceLimitError):
            strict_nesting_best(big, set(big.candidate_mask))


def test_criterion_7_compressed_forest_maintenance():
    with criterion(7, 30.0, "10^4 incremental steps equal recompute; linear touch counts"):
        rng = random.Random(7_777)
        total_steps = 0
        forest_seed = 0
        while total_steps < 10_000:
            forest_seed += 1
            inst = random_forest(
                GeneratorConfig(n_eq=(30, 50), or_prob=0.0, seed=900_000 + forest_seed)
            )
            forest = inst.forest
            candidates = sorted(forest.candidate_mask)
            cf = compress(forest, set())
            selected: set[int] = set()
            for _ in range(2_000):
                total_steps += 1
                before = len(selected)
                if selected and (rng.random() < 0.5 or len(selected) == len(candidates)):
                    victim = rng.choice(sorted(selected))
                    cf.remove(victim)
                    selected.discard(victim)
                else:
                    extra = rng.choice([c for c in candidates if c not in selected])
                    cf.add(extra)
                    selected.add(extra)
                    assert cf.last_op_touched <= before + 1
                assert cf.edge_set() == naive_compressed_edges(forest, selected)


def test_criterion_8_randomized_sanity():
    with criterion(
        8, 60.0, "2PO medians >= random sampling at equal budget; SA(T->0) == II"
    ):
        evals = 250
        seeds = range(5)
        for name in ("fig2", "fig5", "fig6", "fig7", "fig8"):
            inst = fixture(name)
            rs = statistics.median(
                random_sampling(inst, trials=evals, seed=s).benefit for s in seeds
            )
            tpo = statistics.median(
                local_search(inst, "2PO", {"max_evals": evals}, seed=s).benefit
                for s in seeds
            )
            assert tpo >= rs - 1e-9, f"{name}: 2PO median {tpo} < sampling median {rs}"
        for name in ("fig7", "fig2"):
            inst = fixture(name)
            shared = {"neighborhood": "kalnis", "max_evals": 150, "restarts": 1, "stall": None}
            ii = local_search(inst, "II", dict(shared), seed=3, trace=True)
            sa = local_search(
                inst, "SA", dict(shared, t0=1e-300, steps_per_temp=150, t_min=0.0),
                seed=3, trace=True,
            )
            assert ii.trace == sa.trace


ALGO_CONFIGS = [
    ("exhaustive", {}),
    ("astar", {}),
    ("greedy", {}),
    ("greedy_mk", {"k": 2}),
    ("topk", {"variant": "norm_total_utility", "k": 2}),
    ("random_sampling", {"trials": 80}),
    ("ii", {"restarts": 2}),
    ("sa", {"max_evals": 150}),
    ("2po", {"max_evals": 150}),
    ("genetic", {"generations": 12}),
    ("iterative_flip", {"iterations": 60}),
]


def test_criterion_9_determinism(tmp_path, monkeypatch, capsys):
    with criterion(9, 60.0, "byte-identical reports under thread counts 1 and 8"):
        # direct API runs under both thread settings
        per_threads: dict[str, list[str]] = {}
        for threads in ("1", "8"):
            monkeypatch.setenv("MQO_SELECT_THREADS", threads)
            blobs = []
            for algo, params in ALGO_CONFIGS:
                inst = fixture("fig7")
                report = run_algorithm(inst, algo, seed=7, params=dict(params))
                blobs.append(report_text(report, include_elapsed=False))
            inst5 = fixture("fig5")
            blobs.append(
                report_text(
                    run_algorithm(inst5, "genetic", seed=7, params={"generations": 10}),
                    include_elapsed=False,
                )
            )
            per_threads[threads] = blobs
        assert per_threads["1"] == per_threads["8"]

        # the bench pipeline end to end
        paths = []
        for name in ("fig7", "fig2"):
            path = tmp_path / f"{name}.json"
            assert cli_main(["gen", "--fixture", name, "-o", str(path)]) == 0
            paths.append(str(path))
        capsys.readouterr()
        outputs = []
        for threads in ("1", "8"):
            monkeypatch.setenv("MQO_SELECT_THREADS", threads)
            out = tmp_path / f"bench_{threads}.csv"
            assert (
                cli_main(
                    [
                        "bench",
                        "--instances", ",".join(paths),
                        "--algos", "greedy,sa,iterative_flip,genetic",
                        "--seeds", "0,1",
                        "-o", str(out),
                    ]
                )
                == 0
            )
            rows = out.read_text().splitlines()
            drop = rows[0].split(",").index("elapsed_ns")
            outputs.append(
                [",".join(v for i, v in enumerate(r.split(",")) if i != drop) for r in rows]
            )
        assert outputs[0] == outputs[1]
