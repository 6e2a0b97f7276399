"""Expression-forest data model.

A forest is a bipartite DAG of data nodes ("eq" nodes, each the result of
some subexpression) and operation nodes ("op" nodes). An op node requires
all of its input eq nodes (AND semantics); an eq node with several producer
ops has alternative execution paths (OR semantics). Adjacency is stored
downward, consumer -> requirement: eq -> producer ops -> input eqs.

Forests are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from .errors import InconsistentInputError, MalformedInputError, ResourceLimitError

# Ancestor closures are only built for desk-scale forests; the bench-scale
# paths (reuse oracle, generators) never ask for one.
CLOSURE_NODE_CAP = 20_000


@dataclass(frozen=True)
class EqNode:
    """Data node. `size` doubles as the read/reuse time by convention."""

    id: int
    label: str
    size: float
    producers: tuple[int, ...] = ()  # op ids; >1 means OR alternatives


@dataclass(frozen=True)
class OpNode:
    """Operation node. `cost` excludes the derivation of its operands."""

    id: int
    label: str
    cost: float
    inputs: tuple[int, ...]  # eq ids, all required (AND semantics)
    output: int  # eq id


@dataclass(frozen=True)
class Root:
    """Workload entry point; `weight` scales the query's contribution."""

    eq: int
    weight: float = 1.0


class ExpressionForest:
    """Immutable AND-OR DAG plus workload roots and the candidate mask."""

    def __init__(
        self,
        eq_nodes: Sequence[EqNode],
        op_nodes: Sequence[OpNode],
        roots: Sequence[Root],
        candidates: Iterable[int] = (),
    ):
        self.eq_nodes: tuple[EqNode, ...] = tuple(eq_nodes)
        self.op_nodes: tuple[OpNode, ...] = tuple(op_nodes)
        self.roots: tuple[Root, ...] = tuple(roots)
        self.candidate_mask: frozenset[int] = frozenset(candidates)
        self._topo: tuple[int, ...] | None = None
        self._down: list[int] | None = None  # bitmask of strict eq descendants
        self._up: list[int] | None = None  # bitmask of strict eq ancestors
        self._validate()

    # -- validation -----------------------------------------------------

    def _validate(self) -> None:
        for pos, eq in enumerate(self.eq_nodes):
            where = f"eq_nodes[{pos}]"
            if eq.id != pos:
                raise MalformedInputError(f"{where}.id: expected dense id {pos}, got {eq.id}")
            if not (isinstance(eq.size, (int, float)) and math.isfinite(eq.size) and eq.size >= 0):
                raise MalformedInputError(f"{where}.size: must be a finite non-negative number")
            for j, op_id in enumerate(eq.producers):
                if not (0 <= op_id < len(self.op_nodes)):
                    raise MalformedInputError(f"{where}.producers[{j}]: unknown op id {op_id}")
                if self.op_nodes[op_id].output != eq.id:
                    raise MalformedInputError(
                        f"{where}.producers[{j}]: op {op_id} does not output eq {eq.id}"
                    )
        for pos, op in enumerate(self.op_nodes):
            where = f"op_nodes[{pos}]"
            if op.id != pos:
                raise MalformedInputError(f"{where}.id: expected dense id {pos}, got {op.id}")
            if not (isinstance(op.cost, (int, float)) and math.isfinite(op.cost) and op.cost >= 0):
                raise MalformedInputError(f"{where}.cost: must be a finite non-negative number")
            if not op.inputs:
                raise MalformedInputError(f"{where}.inputs: operation requires at least one input")
            for j, eq_id in enumerate(op.inputs):
                if not (0 <= eq_id < len(self.eq_nodes)):
                    raise MalformedInputError(f"{where}.inputs[{j}]: unknown eq id {eq_id}")
            if not (0 <= op.output < len(self.eq_nodes)):
                raise MalformedInputError(f"{where}.output: unknown eq id {op.output}")
            if op.id not in self.eq_nodes[op.output].producers:
                raise MalformedInputError(
                    f"{where}.output: eq {op.output} does not list op {op.id} as producer"
                )
        for pos, root in enumerate(self.roots):
            where = f"roots[{pos}]"
            if not (0 <= root.eq < len(self.eq_nodes)):
                raise MalformedInputError(f"{where}.eq: unknown eq id {root.eq}")
            if not (math.isfinite(root.weight) and root.weight > 0):
                raise MalformedInputError(f"{where}.weight: must be a finite positive number")
        for c in self.candidate_mask:
            if not (0 <= c < len(self.eq_nodes)):
                raise MalformedInputError(f"candidate_mask: unknown eq id {c}")
        self._topo = self._compute_topo()

    # -- structure ------------------------------------------------------

    def n_eq(self) -> int:
        return len(self.eq_nodes)

    def producers_of(self, eq_id: int) -> tuple[OpNode, ...]:
        return tuple(self.op_nodes[op_id] for op_id in self.eq_nodes[eq_id].producers)

    def is_leaf(self, eq_id: int) -> bool:
        return not self.eq_nodes[eq_id].producers

    def is_and_forest(self) -> bool:
        """True when no eq node has alternative producers."""
        return all(len(eq.producers) <= 1 for eq in self.eq_nodes)

    def eq_children(self, eq_id: int) -> list[int]:
        """Operand eq nodes across all producers, deduplicated, id order preserved."""
        seen: list[int] = []
        for op_id in self.eq_nodes[eq_id].producers:
            for i in self.op_nodes[op_id].inputs:
                if i not in seen:
                    seen.append(i)
        return seen

    def _compute_topo(self) -> tuple[int, ...]:
        """Kahn's algorithm over the eq layer, ties broken by ascending id.

        Operand descendants come first: every eq node appears after every
        eq node reachable below it.
        """
        import heapq

        n = len(self.eq_nodes)
        consumers: list[list[int]] = [[] for _ in range(n)]
        indeg = [0] * n
        for eq in self.eq_nodes:
            deps = self.eq_children(eq.id)
            indeg[eq.id] = len(deps)
            for d in deps:
                consumers[d].append(eq.id)
        ready = [i for i in range(n) if indeg[i] == 0]
        heapq.heapify(ready)
        order: list[int] = []
        while ready:
            node = heapq.heappop(ready)
            order.append(node)
            for c in consumers[node]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != n:
            raise MalformedInputError("forest contains a cycle")
        return tuple(order)

    def topo_order(self) -> tuple[int, ...]:
        assert self._topo is not None
        return self._topo

    # -- ancestor closure -----------------------------------------------

    def _ensure_closure(self) -> None:
        if self._down is not None:
            return
        n = len(self.eq_nodes)
        if n > CLOSURE_NODE_CAP:
            raise ResourceLimitError(
                f"ancestor closure requested for {n} eq nodes (cap {CLOSURE_NODE_CAP})"
            )
        down = [0] * n
        for node in self.topo_order():  # descendants first
            mask = 0
            for i in self.eq_children(node):
                mask |= (1 << i) | down[i]
            down[node] = mask
        up = [0] * n
        for node in reversed(self.topo_order()):  # ancestors first
            for i in self.eq_children(node):
                up[i] |= (1 << node) | up[node]
        self._down = down
        self._up = up

    def is_ancestor(self, a: int, b: int) -> bool:
        """True iff `a` lies strictly above `b` on some derivation path."""
        self._ensure_closure()
        assert self._down is not None
        return bool((self._down[a] >> b) & 1)

    def descendants_mask(self, a: int) -> int:
        self._ensure_closure()
        assert self._down is not None
        return self._down[a]

    def ancestors_mask(self, a: int) -> int:
        self._ensure_closure()
        assert self._up is not None
        return self._up[a]

    # -- serialization ----------------------------------------------------

    def to_payload(self, extras: Mapping[str, Any] | None = None) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "eq_nodes": [
                {
                    "id": eq.id,
                    "label": eq.label,
                    "size": _canonical_number(eq.size),
                    "candidate": eq.id in self.candidate_mask,
                }
                for eq in self.eq_nodes
            ],
            "op_nodes": [
                {
                    "id": op.id,
                    "label": op.label,
                    "cost": _canonical_number(op.cost),
                    "inputs": list(op.inputs),
                    "output": op.output,
                }
                for op in self.op_nodes
            ],
            "roots": [
                {"eq": r.eq, "weight": _canonical_number(r.weight)} for r in self.roots
            ],
        }
        if extras:
            payload.update(extras)
        return payload

    def to_canonical_text(self, extras: Mapping[str, Any] | None = None) -> str:
        """Canonical serialization: spec key order, nodes sorted by id."""
        return json.dumps(self.to_payload(extras), indent=2) + "\n"


def _canonical_number(x: float) -> int | float:
    if isinstance(x, bool):  # pragma: no cover - never stored
        return int(x)
    f = float(x)
    if f.is_integer() and abs(f) < 2**53:
        return int(f)
    return f


def forest_from_payload(payload: Mapping[str, Any]) -> ExpressionForest:
    """Parse and validate the forest file format, with location diagnostics."""
    if not isinstance(payload, Mapping):
        raise MalformedInputError("top level: expected an object")
    for key in ("eq_nodes", "op_nodes", "roots"):
        if key not in payload:
            raise MalformedInputError(f"top level: missing required key '{key}'")
        if not isinstance(payload[key], list):
            raise MalformedInputError(f"{key}: expected an array")

    eq_nodes: list[EqNode] = []
    candidates: set[int] = set()
    for pos, raw in enumerate(payload["eq_nodes"]):
        where = f"eq_nodes[{pos}]"
        if not isinstance(raw, Mapping):
            raise MalformedInputError(f"{where}: expected an object")
        try:
            eq_id = int(raw["id"])
            label = str(raw["label"])
            size = float(raw["size"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInputError(f"{where}: {exc}") from exc
        if bool(raw.get("candidate", False)):
            candidates.add(eq_id)
        eq_nodes.append(EqNode(id=eq_id, label=label, size=size))

    op_nodes: list[OpNode] = []
    for pos, raw in enumerate(payload["op_nodes"]):
        where = f"op_nodes[{pos}]"
        if not isinstance(raw, Mapping):
            raise MalformedInputError(f"{where}: expected an object")
        try:
            op_id = int(raw["id"])
            label = str(raw["label"])
            cost = float(raw["cost"])
            inputs = tuple(int(i) for i in raw["inputs"])
            output = int(raw["output"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInputError(f"{where}: {exc}") from exc
        op_nodes.append(OpNode(id=op_id, label=label, cost=cost, inputs=inputs, output=output))

    # Producer lists are derivable from op outputs; rebuild them here so the
    # file format stays minimal.
    producers: dict[int, list[int]] = {}
    for op in op_nodes:
        producers.setdefault(op.output, []).append(op.id)
    eq_nodes = [
        EqNode(id=eq.id, label=eq.label, size=eq.size, producers=tuple(producers.get(eq.id, ())))
        for eq in eq_nodes
    ]

    roots: list[Root] = []
    for pos, raw in enumerate(payload["roots"]):
        where = f"roots[{pos}]"
        if not isinstance(raw, Mapping):
            raise MalformedInputError(f"{where}: expected an object")
        try:
            roots.append(Root(eq=int(raw["eq"]), weight=float(raw.get("weight", 1))))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInputError(f"{where}: {exc}") from exc

    return ExpressionForest(eq_nodes, op_nodes, roots, candidates)


# -- construction from nested plan descriptions --------------------------


def build_tree(plan_description: Mapping[str, Any]) -> ExpressionForest:
    """Build a single-root forest from a nested eq/op description.

    An eq description is ``{"label", "size", "candidate"?, "op"?}`` where
    ``op`` is ``{"label", "cost", "inputs": [eq descriptions]}``. Leaves
    omit ``op``. Node count of the result equals the description's.
    """
    eq_nodes: list[EqNode] = []
    op_nodes: list[OpNode] = []
    candidates: set[int] = set()

    def visit(desc: Any, on_path: set[int]) -> int:
        if not isinstance(desc, Mapping):
            raise MalformedInputError("plan description: expected an object per node")
        if id(desc) in on_path:
            raise MalformedInputError("plan description: cyclic node reference")
        try:
            label = str(desc["label"])
            size = float(desc["size"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInputError(f"plan description node: {exc}") from exc
        op_desc = desc.get("op")
        eq_id = len(eq_nodes)
        eq_nodes.append(EqNode(id=eq_id, label=label, size=size))  # placeholder
        if bool(desc.get("candidate", op_desc is not None)):
            candidates.add(eq_id)
        if op_desc is not None:
            try:
                op_label = str(op_desc["label"])
                op_cost = float(op_desc["cost"])
                input_descs = list(op_desc["inputs"])
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedInputError(f"plan description op: {exc}") from exc
            if not input_descs:
                raise MalformedInputError("plan description op: operation with zero inputs")
            on_path = on_path | {id(desc)}
            input_ids = [visit(child, on_path) for child in input_descs]
            op_id = len(op_nodes)
            op_nodes.append(
                OpNode(id=op_id, label=op_label, cost=op_cost, inputs=tuple(input_ids), output=eq_id)
            )
            eq_nodes[eq_id] = EqNode(
                id=eq_id, label=label, size=size, producers=(op_id,)
            )
        return eq_id

    root_id = visit(plan_description, set())
    return ExpressionForest(eq_nodes, op_nodes, [Root(eq=root_id)], candidates)


# -- merging ---------------------------------------------------------------


def merge_trees(trees: Sequence[ExpressionForest]) -> ExpressionForest:
    """Merge per-query forests, unifying structurally identical eq nodes.

    The structural signature of an eq node is (label, ordered producer
    signatures); an op signature is (label, ordered input signatures).
    Unified nodes must agree on size (and ops on cost), otherwise an
    inconsistent-input error is raised. The result has one root entry per
    input root, in input order.
    """
    eq_nodes: list[EqNode] = []
    op_nodes: list[OpNode] = []
    candidates: set[int] = set()
    roots: list[Root] = []
    eq_by_sig: dict[Any, int] = {}
    op_by_sig: dict[Any, int] = {}

    for forest in trees:
        local_eq_sig: dict[int, Any] = {}
        local_eq_new: dict[int, int] = {}
        for node in forest.topo_order():
            eq = forest.eq_nodes[node]
            op_sigs = []
            for op in forest.producers_of(node):
                op_sigs.append((op.label, tuple(local_eq_sig[i] for i in op.inputs)))
            sig = (eq.label, tuple(op_sigs))
            local_eq_sig[node] = sig
            if sig in eq_by_sig:
                new_id = eq_by_sig[sig]
                if eq_nodes[new_id].size != eq.size:
                    raise InconsistentInputError(
                        f"conflicting sizes for structurally identical node "
                        f"{eq.label!r}: {eq_nodes[new_id].size} vs {eq.size}"
                    )
            else:
                new_id = len(eq_nodes)
                eq_by_sig[sig] = new_id
                new_producers: list[int] = []
                for op, op_sig_tail in zip(forest.producers_of(node), op_sigs):
                    op_sig = (op_sig_tail, sig)
                    if op_sig in op_by_sig:
                        existing = op_by_sig[op_sig]
                        if op_nodes[existing].cost != op.cost:
                            raise InconsistentInputError(
                                f"conflicting costs for structurally identical op "
                                f"{op.label!r}: {op_nodes[existing].cost} vs {op.cost}"
                            )
                        new_producers.append(existing)
                        continue
                    new_op_id = len(op_nodes)
                    op_by_sig[op_sig] = new_op_id
                    op_nodes.append(
                        OpNode(
                            id=new_op_id,
                            label=op.label,
                            cost=op.cost,
                            inputs=tuple(local_eq_new[i] for i in op.inputs),
                            output=new_id,
                        )
                    )
                    new_producers.append(new_op_id)
                eq_nodes.append(
                    EqNode(id=new_id, label=eq.label, size=eq.size, producers=tuple(new_producers))
                )
            local_eq_new[node] = new_id
            if node in forest.candidate_mask:
                candidates.add(new_id)
        for root in forest.roots:
            roots.append(Root(eq=local_eq_new[root.eq], weight=root.weight))

    return ExpressionForest(eq_nodes, op_nodes, roots, candidates)


def topo_order(forest: ExpressionForest) -> list[int]:
    """Topological order of eq nodes, operand descendants first."""
    return list(forest.topo_order())
