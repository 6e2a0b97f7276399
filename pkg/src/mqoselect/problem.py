"""Candidate Selection Problem instance: forest + costs + expense + budget."""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import costmodel, expense as expense_mod
from .costmodel import CostTable
from .expense import Budget, ExpenseModel
from .forest import ExpressionForest


@dataclass(frozen=True)
class CspInstance:
    """Maximize workload benefit subject to the total-expense budget."""

    forest: ExpressionForest
    cost: CostTable
    expense: ExpenseModel
    budget: Budget

    @classmethod
    def build(
        cls,
        forest: ExpressionForest,
        expense: ExpenseModel | None = None,
        budget: Budget | float | None = None,
    ) -> "CspInstance":
        if expense is None:
            expense = ExpenseModel(kind="static")
        if budget is None:
            budget = Budget(limit=float("inf"))
        elif not isinstance(budget, Budget):
            budget = Budget(limit=float(budget))
        return cls(forest=forest, cost=costmodel.ex_costs(forest), expense=expense, budget=budget)

    @property
    def candidates(self) -> tuple[int, ...]:
        return tuple(sorted(self.forest.candidate_mask))

    def benefit(self, selection) -> float:
        return costmodel.workload_benefit(self.forest, frozenset(selection), self.cost)

    def expense_of(self, selection) -> float:
        return expense_mod.total_expense(self.expense, self.forest, selection, self.cost)

    def feasible(self, selection) -> bool:
        return self.budget.feasible(self.expense_of(selection))

    def benefit_upper_bound(self) -> float:
        """Sum of positive unit benefits times flow counts; bounds any benefit."""
        flows = costmodel.flow_counts(self.forest)
        return sum(
            max(0.0, self.cost.unit_benefit[c]) * flows[c] for c in self.candidates
        )

    def resolved_budget(self) -> Budget:
        """Budget with the auto penalty coefficient materialized."""
        if self.budget.penalty_r is not None:
            return self.budget
        return replace(self.budget, penalty_r=1.0 + self.benefit_upper_bound())
