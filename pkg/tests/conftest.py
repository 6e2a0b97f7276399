"""Shared test helpers: independent oracles kept out of the package."""

from __future__ import annotations

import random

from mqoselect import ExpressionForest
from mqoselect.instances import GeneratorConfig, random_forest


def naive_compressed_edges(forest: ExpressionForest, selected) -> frozenset[tuple[int, int]]:
    """Edge set of the compressed forest, straight from the definition:
    parent -> child iff parent is an ancestor of child and no selected
    node sits strictly between them."""
    selected = sorted(selected)
    sel_mask = 0
    for s in selected:
        sel_mask |= 1 << s
    edges = set()
    for parent in selected:
        down = forest.descendants_mask(parent)
        for child in selected:
            if parent == child or not ((down >> child) & 1):
                continue
            between = down & forest.ancestors_mask(child) & sel_mask
            if not between:
                edges.add((parent, child))
    return frozenset(edges)


def brute_reachability(forest: ExpressionForest) -> dict[int, set[int]]:
    """All-pairs downward reachability by plain DFS, one run per node."""
    reach: dict[int, set[int]] = {}
    for start in range(forest.n_eq()):
        seen: set[int] = set()
        stack = list(forest.eq_children(start))
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            stack.extend(forest.eq_children(node))
        reach[start] = seen
    return reach


def random_and_instance(seed: int, max_eq: int = 12, budget_fraction: float | None = None):
    rng = random.Random(seed ^ 0x5EED)
    frac = budget_fraction if budget_fraction is not None else rng.uniform(0.2, 0.7)
    config = GeneratorConfig(
        n_eq=(3, max_eq),
        fan_in=(1, 3),
        or_prob=0.0,
        budget_fraction=frac,
        seed=seed,
    )
    return random_forest(config)


def random_selection(rng: random.Random, candidates) -> frozenset[int]:
    return frozenset(c for c in candidates if rng.random() < 0.5)
