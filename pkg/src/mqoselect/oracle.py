"""Brute-force reference implementations for tests and acceptance runs.

Nothing here belongs in a solving pipeline: subset enumeration and
explicit flow unfolding are exponential by design. The bench command may
use brute_force_select for ground-truth columns.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import costmodel
from .errors import ResourceLimitError, UnsupportedStructureError
from .forest import ExpressionForest
from .problem import CspInstance

_TOL = 1e-9


@dataclass(frozen=True)
class OracleResult:
    optimum: float
    optimal_selections: tuple[tuple[int, ...], ...]
    evaluations: int


def brute_force_select(instance: CspInstance, cap: int = 20) -> OracleResult:
    """All feasible optima by full subset enumeration.

    Statically infeasible candidates (size above the whole budget) are
    excluded up front; they cannot appear in any feasible set.
    """
    from .algorithms import live_candidates

    cand = live_candidates(instance)
    n = len(cand)
    if n > cap:
        raise ResourceLimitError(f"brute force capped at {cap} candidates, got {n}")
    best = 0.0
    optima: list[tuple[int, ...]] = []
    evaluations = 0
    for mask in range(1 << n):
        sel = tuple(cand[i] for i in range(n) if (mask >> i) & 1)
        evaluations += 1
        if not instance.budget.feasible(instance.expense_of(sel)):
            continue
        benefit = instance.benefit(sel)
        if benefit > best + _TOL:
            best = benefit
            optima = [sel]
        elif abs(benefit - best) <= _TOL:
            optima.append(sel)
    return OracleResult(
        optimum=best, optimal_selections=tuple(sorted(optima)), evaluations=evaluations
    )


def naive_query_cost(forest: ExpressionForest, root: int, z, depth: int = 0) -> float:
    """Min-recursion plan evaluation without memoization (tree unfolding)."""
    if depth > 64:
        raise ResourceLimitError("naive evaluation recursion too deep")
    z = frozenset(z)
    eq = forest.eq_nodes[root]
    if not eq.producers:
        derive = float(eq.size)
    else:
        derive = min(
            forest.op_nodes[op_id].cost
            + sum(naive_query_cost(forest, i, z, depth + 1) for i in forest.op_nodes[op_id].inputs)
            for op_id in sorted(eq.producers)
        )
    if root in z:
        return min(derive, float(eq.size))
    return derive


def naive_workload_benefit(forest: ExpressionForest, z) -> float:
    return sum(
        r.weight * (naive_query_cost(forest, r.eq, frozenset()) - naive_query_cost(forest, r.eq, z))
        for r in forest.roots
    )


def enumerate_flows(
    forest: ExpressionForest, z, node_cap: int = 14, path_cap: int = 500_000
) -> dict[int, float]:
    """Per-candidate reuse counts by explicit root-to-node path unfolding.

    Each weighted root spawns one flow; a flow descends the (unique)
    producer's operands and terminates at the first node whose subtree
    benefit is realized by reusing the node itself. Validates the reuse
    oracle's flow-counting pass.
    """
    if not forest.is_and_forest():
        raise UnsupportedStructureError("flow enumeration requires an AND-forest")
    if forest.n_eq() > node_cap:
        raise ResourceLimitError(f"flow enumeration capped at {node_cap} nodes")
    z = frozenset(z)
    table = costmodel.ex_costs(forest)

    msb: dict[int, float] = {}

    def msb_of(node: int) -> float:
        if node in msb:
            return msb[node]
        eq = forest.eq_nodes[node]
        child_sum = 0.0
        if eq.producers:
            op = forest.op_nodes[eq.producers[0]]
            child_sum = sum(msb_of(i) for i in op.inputs)
        rb = max(0.0, table.unit_benefit[node]) if node in z else 0.0
        msb[node] = max(child_sum, rb)
        return msb[node]

    counts: dict[int, float] = {}
    visited_paths = 0

    def walk(node: int, weight: float) -> None:
        nonlocal visited_paths
        visited_paths += 1
        if visited_paths > path_cap:
            raise ResourceLimitError("flow enumeration path cap exceeded")
        rb = max(0.0, table.unit_benefit[node]) if node in z else 0.0
        if rb > 0.0 and msb_of(node) <= rb:
            counts[node] = counts.get(node, 0.0) + weight
            return
        eq = forest.eq_nodes[node]
        if not eq.producers:
            return
        op = forest.op_nodes[eq.producers[0]]
        for i in op.inputs:
            walk(i, weight)

    for root in forest.roots:
        walk(root.eq, root.weight)
    return counts
