"""Execution costs, benefits, and the linear-time reuse oracle.

Costs follow computation-flow semantics: the from-scratch cost of a node
sums the full derivation cost of every operand, even when operands are
shared elsewhere in the DAG (a shared node is recomputed once per flow
unless it is reused). Reading a stored node costs its reuse cost, which
defaults to its size.

All evaluators are iterative; forests with 1e5 nodes and chain depth of
the same order must not hit the interpreter recursion limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError, ResourceLimitError, UnsupportedStructureError
from .forest import ExpressionForest

_INF = math.inf


@dataclass(frozen=True)
class CostTable:
    """Per-eq-node costs: from-scratch derivation, reuse, and unit benefit.

    unit_benefit is the speedup of a single reuse: ex_cost - reuse_cost.
    """

    ex_cost: tuple[float, ...]
    reuse_cost: tuple[float, ...]
    unit_benefit: tuple[float, ...]


@dataclass
class SelectionState:
    """Reuse statistics of a selection, as filled by the reuse oracle.

    n_reuses holds weighted flow counts (integral whenever root weights
    are integral); total_benefit is the Eq-style decomposition
    sum(unit_benefit[c] * n_reuses[c]) over the reused set.
    """

    selected: frozenset[int]
    reused: frozenset[int]
    n_reuses: dict[int, float]
    total_benefit: float
    total_expense: float = 0.0
    visits: int = 0


def ex_costs(forest: ExpressionForest, reuse_override: dict[int, float] | None = None) -> CostTable:
    """One bottom-up pass computing flow-semantics from-scratch costs.

    OR nodes take the minimum-cost producer (ties resolved toward the
    lowest op id, which only matters for plan extraction, not the value).
    """
    n = forest.n_eq()
    ex = [0.0] * n
    for node in forest.topo_order():
        eq = forest.eq_nodes[node]
        if not eq.producers:
            ex[node] = float(eq.size)
            continue
        best = _INF
        for op_id in sorted(eq.producers):
            op = forest.op_nodes[op_id]
            cost = op.cost + sum(ex[i] for i in op.inputs)
            if cost < best:
                best = cost
        ex[node] = best
    reuse = [float(eq.size) for eq in forest.eq_nodes]
    if reuse_override:
        for k, v in reuse_override.items():
            reuse[k] = float(v)
    benefit = [ex[i] - reuse[i] for i in range(n)]
    return CostTable(ex_cost=tuple(ex), reuse_cost=tuple(reuse), unit_benefit=tuple(benefit))


def _selection_costs(
    forest: ExpressionForest,
    z: frozenset[int] | set[int],
    needed: list[int],
    table: CostTable,
    choices: dict[int, int] | None = None,
) -> dict[int, float]:
    """Memoized lightest-path cost for every node in `needed` under selection z.

    cost(n) = min(reuse_cost(n) if selected, cheapest producer cost +
    operand costs); leaves cost their size. `choices` pins the producer
    index for OR nodes instead of taking the minimum.
    """
    memo: dict[int, float] = {}
    stack: list[tuple[int, bool]] = [(node, False) for node in reversed(needed)]
    while stack:
        node, expanded = stack.pop()
        if node in memo:
            continue
        eq = forest.eq_nodes[node]
        producers = eq.producers
        if choices is not None and len(producers) > 1:
            idx = choices.get(node)
            if idx is not None:
                if not (0 <= idx < len(producers)):
                    raise ConfigurationError(
                        f"plan choice {idx} out of range for eq {node} "
                        f"({len(producers)} alternatives)"
                    )
                producers = (producers[idx],)
        if not expanded:
            stack.append((node, True))
            for op_id in producers:
                for i in forest.op_nodes[op_id].inputs:
                    if i not in memo:
                        stack.append((i, False))
            continue
        derive = _INF
        if not producers:
            derive = float(eq.size)
        else:
            for op_id in sorted(producers):
                op = forest.op_nodes[op_id]
                cost = op.cost + sum(memo[i] for i in op.inputs)
                if cost < derive:
                    derive = cost
        if node in z:
            derive = min(derive, table.reuse_cost[node])
        memo[node] = derive
    return memo


def query_cost(
    forest: ExpressionForest,
    root: int,
    z: frozenset[int] | set[int],
    table: CostTable | None = None,
    choices: dict[int, int] | None = None,
) -> float:
    """Lightest computation-path cost of one query root under selection z."""
    if table is None:
        table = ex_costs(forest)
    return _selection_costs(forest, frozenset(z), [root], table, choices)[root]


def workload_benefit(
    forest: ExpressionForest,
    z: frozenset[int] | set[int],
    table: CostTable | None = None,
    choices: dict[int, int] | None = None,
) -> float:
    """Weighted workload speedup of selection z: sum of per-root T_empty - T_z.

    The baseline is always the free (unpinned) optimum, so with `choices`
    pinning OR decisions the result may be negative for bad plans.
    """
    if table is None:
        table = ex_costs(forest)
    roots = [r.eq for r in forest.roots]
    costs = _selection_costs(forest, frozenset(z), roots, table, choices)
    return sum(r.weight * (table.ex_cost[r.eq] - costs[r.eq]) for r in forest.roots)


def _require_and_forest(forest: ExpressionForest, what: str) -> None:
    if not forest.is_and_forest():
        raise UnsupportedStructureError(
            f"{what} requires an AND-forest; an eq node has alternative producers"
        )


def subtree_benefits(
    forest: ExpressionForest,
    z: frozenset[int] | set[int],
    table: CostTable | None = None,
) -> list[float]:
    """Maximum achievable reuse benefit within each node's subtree (pass 1).

    max_subtree_benefit(n) = max(sum over operand children, reuse benefit
    of n itself), where the reuse benefit of a selected node is its unit
    benefit clamped at zero (a reuse is always optional).
    """
    _require_and_forest(forest, "subtree benefit computation")
    if table is None:
        table = ex_costs(forest)
    msb = [0.0] * forest.n_eq()
    for node in forest.topo_order():
        eq = forest.eq_nodes[node]
        child_sum = 0.0
        if eq.producers:
            op = forest.op_nodes[eq.producers[0]]
            child_sum = sum(msb[i] for i in op.inputs)
        rb = max(0.0, table.unit_benefit[node]) if node in z else 0.0
        msb[node] = child_sum if child_sum > rb else rb
    return msb


def reuse_oracle(
    forest: ExpressionForest,
    z: frozenset[int] | set[int],
    table: CostTable | None = None,
) -> SelectionState:
    """Optimal reuse of a fixed selection on an AND-forest, in linear time.

    Pass 1 computes max_subtree_benefit bottom-up. Pass 2 walks flows from
    the weighted roots top-down; a flow stops at the first node whose
    subtree benefit is realized by reusing the node itself (ties stop
    high), recording one reuse per incoming flow. Nested candidates are
    reused simultaneously whenever they sit on different flows.
    """
    _require_and_forest(forest, "reuse oracle")
    if table is None:
        table = ex_costs(forest)
    z = frozenset(z)
    n = forest.n_eq()
    msb = [0.0] * n
    stop = [False] * n
    visits = 0
    for node in forest.topo_order():
        visits += 1
        eq = forest.eq_nodes[node]
        child_sum = 0.0
        if eq.producers:
            op = forest.op_nodes[eq.producers[0]]
            child_sum = sum(msb[i] for i in op.inputs)
        rb = max(0.0, table.unit_benefit[node]) if node in z else 0.0
        if rb > 0.0 and child_sum <= rb:
            msb[node] = rb
            stop[node] = True
        else:
            msb[node] = child_sum
    flows = [0.0] * n
    for root in forest.roots:
        flows[root.eq] += root.weight
    n_reuses: dict[int, float] = {}
    total = 0.0
    for node in reversed(forest.topo_order()):
        f = flows[node]
        if f <= 0.0:
            continue
        visits += 1
        if stop[node]:
            n_reuses[node] = n_reuses.get(node, 0.0) + f
            total += table.unit_benefit[node] * f
            continue
        if msb[node] <= 0.0:
            continue  # nothing reusable below this flow
        op = forest.op_nodes[forest.eq_nodes[node].producers[0]]
        for i in op.inputs:
            flows[i] += f
    return SelectionState(
        selected=z,
        reused=frozenset(n_reuses),
        n_reuses=n_reuses,
        total_benefit=total,
        visits=visits,
    )


def flow_counts(forest: ExpressionForest) -> list[float]:
    """Weighted number of root-to-node computation flows, with no stopping."""
    n = forest.n_eq()
    flows = [0.0] * n
    for root in forest.roots:
        flows[root.eq] += root.weight
    for node in reversed(forest.topo_order()):
        f = flows[node]
        if f <= 0.0:
            continue
        for i in forest.eq_children(node):
            flows[i] += f
    return flows


def ancestor_count_estimate(forest: ExpressionForest, c: int) -> int:
    """Number of distinct eq ancestors of c; a lower bound on its use count."""
    return forest.ancestors_mask(c).bit_count()


def strict_nesting_best(
    forest: ExpressionForest,
    z: frozenset[int] | set[int],
    node_cap: int = 20,
    stats: dict[str, int] | None = None,
) -> float:
    """Best utility under the strict no-nested-reuse rule, by brute force.

    Maximizes sum of u_c = unit_benefit(c) * n_reuses_c({c}) over subsets
    of z in which no two members are ancestor/descendant related. This is
    the (exponential) constraint the reuse oracle makes unnecessary; kept
    small-scale for comparison only.
    """
    _require_and_forest(forest, "strict-nesting oracle")
    if forest.n_eq() > node_cap:
        raise ResourceLimitError(
            f"strict-nesting oracle capped at {node_cap} nodes, got {forest.n_eq()}"
        )
    table = ex_costs(forest)
    flows = flow_counts(forest)
    members = sorted(z)
    utilities = [table.unit_benefit[c] * flows[c] for c in members]
    related = [forest.ancestors_mask(c) | forest.descendants_mask(c) for c in members]
    steps = 0
    best = 0.0
    k = len(members)

    # Plain include/exclude enumeration; deliberately unpruned so the
    # exponential growth is observable next to the linear oracle.
    stack: list[tuple[int, int, float]] = [(0, 0, 0.0)]
    while stack:
        i, chosen_mask, value = stack.pop()
        steps += 1
        if value > best:
            best = value
        if i >= k:
            continue
        stack.append((i + 1, chosen_mask, value))
        c = members[i]
        if not (related[i] & chosen_mask):
            stack.append((i + 1, chosen_mask | (1 << c), value + utilities[i]))
    if stats is not None:
        stats["steps"] = steps
    return best
