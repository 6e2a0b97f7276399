"""Expense semantics, budget, penalty transform, stochastic comparator.

Three expense kinds:

- static: a candidate costs its size, independent of the selection.
- maintenance: keeping a candidate fresh costs a per-candidate overhead
  plus the cheapest derivation of the candidate where selected proper
  descendants are read at reuse cost (updated descendants are reusable).
- shared_storage: compressed plan-cache storage; a candidate costs a
  reference overhead plus its subtree footprint minus the footprints of
  its maximal selected proper descendants (shared subtrees stored once).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import costmodel
from .errors import ConfigurationError
from .forest import ExpressionForest

EXPENSE_KINDS = ("static", "maintenance", "shared_storage")


@dataclass(frozen=True)
class ExpenseModel:
    kind: str = "static"
    delta: float = 1.0  # per-candidate update overhead (maintenance)
    rho: float = 0.0  # per-candidate reference overhead (shared_storage)

    def __post_init__(self) -> None:
        if self.kind not in EXPENSE_KINDS:
            raise ConfigurationError(
                f"unknown expense kind {self.kind!r}; expected one of {EXPENSE_KINDS}"
            )


@dataclass(frozen=True)
class Budget:
    """Expense budget plus penalty coefficient.

    penalty_r = None means "auto": algorithms resolve it to one plus an
    upper bound on attainable benefit, which keeps penalized search
    effectively inside the feasible region by default.
    """

    limit: float
    penalty_r: float | None = None

    def feasible(self, total_expense: float) -> bool:
        return total_expense <= self.limit


def candidate_expense(
    model: ExpenseModel,
    forest: ExpressionForest,
    c: int,
    selection,
    table: costmodel.CostTable | None = None,
) -> float:
    """Expense of keeping candidate c within the given selection."""
    if model.kind == "static":
        return float(forest.eq_nodes[c].size)
    if table is None:
        table = costmodel.ex_costs(forest)
    if model.kind == "maintenance":
        # c itself is excluded from the reusable set: rebuilding a
        # candidate never reads the stale copy of itself.
        reusable = frozenset(
            s for s in selection if s != c and forest.is_ancestor(c, s)
        )
        return model.delta + costmodel.query_cost(forest, c, reusable, table)
    # shared_storage
    down = forest.descendants_mask(c)
    proper = [s for s in sorted(selection) if s != c and (down >> s) & 1]
    sel_mask = 0
    for s in proper:
        sel_mask |= 1 << s
    maximal = [s for s in proper if not (forest.ancestors_mask(s) & down & sel_mask)]
    footprint = _footprint(forest, c)
    stored = footprint - sum(_footprint(forest, s) for s in maximal)
    return max(0.0, model.rho + stored)


def _footprint(forest: ExpressionForest, c: int) -> float:
    """Total size of c's derivation subtree, c included."""
    total = float(forest.eq_nodes[c].size)
    mask = forest.descendants_mask(c)
    while mask:
        low = mask & -mask
        total += forest.eq_nodes[low.bit_length() - 1].size
        mask ^= low
    return total


def total_expense(
    model: ExpenseModel,
    forest: ExpressionForest,
    selection,
    table: costmodel.CostTable | None = None,
) -> float:
    """Sum of per-candidate expenses, accumulated in ascending id order."""
    members = sorted(selection)
    if model.kind == "static":
        return float(sum(forest.eq_nodes[c].size for c in members))
    if table is None and members:
        table = costmodel.ex_costs(forest)
    sel = frozenset(members)
    return float(sum(candidate_expense(model, forest, c, sel, table) for c in members))


def penalized_benefit(
    benefit: float,
    model: ExpenseModel,
    forest: ExpressionForest,
    selection,
    budget: Budget,
    table: costmodel.CostTable | None = None,
) -> float:
    """Subtract-mode penalty: benefit - r * max(0, total expense - budget)."""
    r = budget.penalty_r
    if r is None:
        raise ConfigurationError("penalty coefficient unresolved; resolve the budget first")
    if r < 0 or not math.isfinite(r):
        raise ConfigurationError(f"penalty coefficient must be non-negative, got {r}")
    overflow = total_expense(model, forest, selection, table) - budget.limit
    if overflow <= 0:
        return benefit
    return benefit - r * overflow


def stochastic_compare(a, b, p: float, rng) -> int:
    """Probabilistic comparator mixing benefit order and expense order.

    With probability p the higher-benefit item wins; otherwise the
    lower-expense item wins. Items expose (benefit, expense) either as a
    pair or via attributes. Returns -1 when a precedes b, 1 when b
    precedes a, 0 on a tie in the drawn mode.
    """
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"comparison probability must lie in [0, 1], got {p}")
    a_benefit, a_expense = _scores(a)
    b_benefit, b_expense = _scores(b)
    if rng.random() < p:
        if a_benefit > b_benefit:
            return -1
        if a_benefit < b_benefit:
            return 1
        return 0
    if a_expense < b_expense:
        return -1
    if a_expense > b_expense:
        return 1
    return 0


def _scores(item) -> tuple[float, float]:
    if hasattr(item, "benefit") and hasattr(item, "expense"):
        return float(item.benefit), float(item.expense)
    benefit, expense = item
    return float(benefit), float(expense)
