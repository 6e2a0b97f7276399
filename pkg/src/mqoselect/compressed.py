"""Compressed selected-candidate forest with incremental maintenance.

The compressed forest keeps only the selected candidates, connected by
lowest-selected-ancestor edges: parent -> child exists iff parent is an
ancestor of child in the full forest and no other selected node lies
strictly between them. This preserves the topological order of the
selected set at a fraction of its size.

Add/remove run in time linear in the number of selected candidates,
relying on the full forest's precomputed (quadratic-time) ancestor
closure for constant-time is_ancestor checks. Single writer only.
"""

from __future__ import annotations

from .forest import ExpressionForest


class CompressedForest:
    def __init__(self, forest: ExpressionForest, selected: frozenset[int] = frozenset()):
        self.forest = forest
        self.selected: set[int] = set()
        self.children: dict[int, set[int]] = {}
        self.parents: dict[int, set[int]] = {}
        self.last_op_touched = 0  # nodes examined by the last add/remove
        forest._ensure_closure()
        for c in sorted(selected):
            self.add(c)

    # -- queries ----------------------------------------------------------

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (p, c) for p in self.children for c in self.children[p]
        )

    def roots(self) -> list[int]:
        """Selected nodes without a compressed parent, ascending."""
        return sorted(c for c in self.selected if not self.parents[c])

    # -- maintenance -------------------------------------------------------

    def add(self, c: int) -> "CompressedForest":
        """Insert candidate c, rewiring lowest-selected-ancestor edges.

        Every selected node is classified once against c via O(1) closure
        lookups; a selected ancestor a is a parent of c iff no other
        selected node sits between a and c, and symmetrically for
        children. Old edges that c now interposes on are removed.
        """
        if c in self.selected:
            raise ValueError(f"candidate {c} is already selected")
        down = self.forest.descendants_mask(c)
        up = self.forest.ancestors_mask(c)
        touched = 1
        ancestors: list[int] = []
        descendants: list[int] = []
        sel_mask = 0
        for s in self.selected:
            touched += 1
            sel_mask |= 1 << s
            if (up >> s) & 1:
                ancestors.append(s)
            elif (down >> s) & 1:
                descendants.append(s)
        # a is a lowest selected ancestor iff no selected node lies in
        # down[a] & up[c]; symmetric for highest selected descendants.
        new_parents = {
            a
            for a in ancestors
            if not (self.forest.descendants_mask(a) & up & sel_mask)
        }
        new_children = {
            d
            for d in descendants
            if not (self.forest.ancestors_mask(d) & down & sel_mask)
        }
        for p in new_parents:
            # c interposes on any old edge from an ancestor of c to a
            # descendant of c; those children re-hang under c below.
            for y in new_children & self.children[p]:
                self.children[p].discard(y)
                self.parents[y].discard(p)
        self.selected.add(c)
        self.children[c] = set(new_children)
        self.parents[c] = set(new_parents)
        for p in new_parents:
            self.children[p].add(c)
        for y in new_children:
            self.parents[y].add(c)
        self.last_op_touched = touched
        return self

    def remove(self, c: int) -> "CompressedForest":
        """Delete candidate c, re-attaching its children to its parents.

        A child re-attaches to a former parent p only if no other selected
        node lies between p and that child (checked against p's remaining
        compressed children).
        """
        if c not in self.selected:
            raise ValueError(f"candidate {c} is not selected")
        old_parents = self.parents.pop(c)
        old_children = self.children.pop(c)
        self.selected.discard(c)
        touched = 1 + len(old_parents) + len(old_children)
        for p in old_parents:
            self.children[p].discard(c)
        for y in old_children:
            self.parents[y].discard(c)
        for p in old_parents:
            p_down = self.forest.descendants_mask(p)
            for y in old_children:
                touched += 1
                y_up = self.forest.ancestors_mask(y)
                blocked = False
                for x in self.children[p]:
                    if (p_down >> x) & 1 and (y_up >> x) & 1:
                        blocked = True
                        break
                if not blocked:
                    self.children[p].add(y)
                    self.parents[y].add(p)
        self.last_op_touched = touched
        return self


def compress(forest: ExpressionForest, selected) -> CompressedForest:
    """Build the compressed forest of a selection from scratch."""
    if not frozenset(selected) <= frozenset(range(forest.n_eq())):
        raise ValueError("selected contains unknown eq ids")
    return CompressedForest(forest, frozenset(selected))


def compressed_add(cf: CompressedForest, c: int) -> CompressedForest:
    """Functional alias for CompressedForest.add (mutates cf)."""
    return cf.add(c)


def compressed_remove(cf: CompressedForest, c: int) -> CompressedForest:
    """Functional alias for CompressedForest.remove (mutates cf)."""
    return cf.remove(c)
