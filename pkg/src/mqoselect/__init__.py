"""Candidate-selection engine for multi-query optimization.

Workloads are expression forests (AND-OR DAGs of data and operation
nodes); candidates are data nodes eligible for materialization. The
package evaluates benefits and expenses under computation-flow
semantics, solves the generalized Candidate Selection Problem with
heuristic, exact, randomized and iterative-flip algorithms, and replaces
the exponential reuse-ILP step of iterative schemes with a linear-time
reuse oracle.
"""

from .algorithms import (
    AlgorithmReport,
    Individual,
    astar,
    exhaustive,
    genetic,
    greedy,
    greedy_mk,
    iterative_flip,
    level_order_filter,
    local_search,
    random_sampling,
    topk,
)
from .compressed import CompressedForest, compress, compressed_add, compressed_remove
from .costmodel import (
    CostTable,
    SelectionState,
    ancestor_count_estimate,
    ex_costs,
    flow_counts,
    query_cost,
    reuse_oracle,
    strict_nesting_best,
    subtree_benefits,
    workload_benefit,
)
from .errors import (
    ConfigurationError,
    InconsistentInputError,
    MalformedInputError,
    ResourceLimitError,
    UnsupportedStructureError,
)
from .expense import (
    Budget,
    ExpenseModel,
    candidate_expense,
    penalized_benefit,
    stochastic_compare,
    total_expense,
)
from .forest import (
    EqNode,
    ExpressionForest,
    OpNode,
    Root,
    build_tree,
    forest_from_payload,
    merge_trees,
    topo_order,
)
from .instances import (
    GeneratorConfig,
    KnapsackInstance,
    fixture,
    fixture_labels,
    knapsack_dp,
    knapsack_reduction,
    random_forest,
)
from .problem import CspInstance

__version__ = "0.1.0"

__all__ = [
    "AlgorithmReport",
    "Budget",
    "CompressedForest",
    "ConfigurationError",
    "CostTable",
    "CspInstance",
    "EqNode",
    "ExpenseModel",
    "ExpressionForest",
    "GeneratorConfig",
    "InconsistentInputError",
    "Individual",
    "KnapsackInstance",
    "MalformedInputError",
    "OpNode",
    "ResourceLimitError",
    "Root",
    "SelectionState",
    "UnsupportedStructureError",
    "ancestor_count_estimate",
    "astar",
    "build_tree",
    "candidate_expense",
    "compress",
    "compressed_add",
    "compressed_remove",
    "ex_costs",
    "exhaustive",
    "fixture",
    "fixture_labels",
    "flow_counts",
    "forest_from_payload",
    "genetic",
    "greedy",
    "greedy_mk",
    "iterative_flip",
    "knapsack_dp",
    "knapsack_reduction",
    "level_order_filter",
    "local_search",
    "merge_trees",
    "penalized_benefit",
    "query_cost",
    "random_forest",
    "random_sampling",
    "reuse_oracle",
    "stochastic_compare",
    "strict_nesting_best",
    "subtree_benefits",
    "topk",
    "topo_order",
    "total_expense",
    "workload_benefit",
]
