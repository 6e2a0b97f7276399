"""Selection algorithms over the Candidate Selection Problem.

Every algorithm returns an AlgorithmReport whose benefit and expense are
recomputed independently at report time, so a report is self-verifying.
Runs are logically single-threaded; all randomness flows from the seed.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from . import costmodel, expense as expense_mod
from .costmodel import SelectionState
from .errors import ConfigurationError, ResourceLimitError, UnsupportedStructureError
from .forest import ExpressionForest
from .problem import CspInstance

_TIE_TOL = 1e-9


@dataclass(frozen=True)
class AlgorithmReport:
    algorithm: str
    selection: tuple[int, ...]
    benefit: float
    expense: float
    feasible: bool
    iterations: int
    trace: tuple[tuple[float, float], ...] | None
    seed: int
    elapsed_ns: int
    extras: dict[str, Any] = field(default_factory=dict)

    def to_payload(self, include_elapsed: bool = True) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "selection": list(self.selection),
            "benefit": self.benefit,
            "expense": self.expense,
            "feasible": self.feasible,
            "iterations": self.iterations,
        }
        if include_elapsed:
            payload["elapsed_ns"] = self.elapsed_ns
        payload["trace"] = [list(t) for t in self.trace] if self.trace is not None else None
        payload["extras"] = self.extras
        return payload


@dataclass(frozen=True)
class Individual:
    """Genetic encoding: selection bits plus per-OR-choice-point plan indices."""

    vs: tuple[int, ...]
    qps: tuple[int, ...] = ()


def _make_report(
    instance: CspInstance,
    algorithm: str,
    selection: Iterable[int],
    iterations: int,
    seed: int,
    started_ns: int,
    trace: list[tuple[float, float]] | None = None,
    extras: dict[str, Any] | None = None,
) -> AlgorithmReport:
    sel = tuple(sorted(selection))
    benefit = instance.benefit(sel)
    total = instance.expense_of(sel)
    return AlgorithmReport(
        algorithm=algorithm,
        selection=sel,
        benefit=benefit,
        expense=total,
        feasible=instance.budget.feasible(total),
        iterations=iterations,
        trace=tuple(trace) if trace is not None else None,
        seed=seed,
        elapsed_ns=time.perf_counter_ns() - started_ns,
        extras=extras or {},
    )


def _better(
    benefit: float, expense: float, sel: tuple[int, ...],
    best: tuple[float, float, tuple[int, ...]] | None,
) -> bool:
    """Higher benefit wins; ties (1e-9) go to smaller expense, then lex order."""
    if best is None:
        return True
    b_benefit, b_expense, b_sel = best
    if benefit > b_benefit + _TIE_TOL:
        return True
    if benefit < b_benefit - _TIE_TOL:
        return False
    if expense < b_expense - _TIE_TOL:
        return True
    if expense > b_expense + _TIE_TOL:
        return False
    return sel < b_sel


# -- exhaustive ------------------------------------------------------------


def live_candidates(instance: CspInstance) -> tuple[int, ...]:
    """Candidates that can appear in some feasible set.

    Under a static model a candidate bigger than the whole budget never
    fits (expenses are selection-independent and non-negative), so exact
    enumeration can drop it up front. Selection-dependent models get no
    pruning.
    """
    if instance.expense.kind != "static":
        return instance.candidates
    return tuple(
        c
        for c in instance.candidates
        if instance.budget.feasible(instance.forest.eq_nodes[c].size)
    )


def exhaustive(instance: CspInstance, cap: int = 20, seed: int = 0) -> AlgorithmReport:
    """Enumerate every subset of candidates that could ever be selected."""
    started = time.perf_counter_ns()
    cand = live_candidates(instance)
    n = len(cand)
    if n > cap:
        raise ResourceLimitError(f"exhaustive search capped at {cap} candidates, got {n}")
    best: tuple[float, float, tuple[int, ...]] | None = None
    evaluated = 0
    for mask in range(1 << n):
        sel = tuple(cand[i] for i in range(n) if (mask >> i) & 1)
        evaluated += 1
        total = instance.expense_of(sel)
        if not instance.budget.feasible(total):
            continue
        benefit = instance.benefit(sel)
        if _better(benefit, total, sel, best):
            best = (benefit, total, sel)
    assert best is not None  # the empty set is always feasible
    return _make_report(instance, "exhaustive", best[2], evaluated, seed, started)


# -- top-k heuristics --------------------------------------------------------

TOPK_VARIANTS = ("freq", "utility", "total_utility", "norm_total_utility")


def topk(instance: CspInstance, variant: str, k: int, seed: int = 0) -> AlgorithmReport:
    """Score candidates independently, keep the best k that stay feasible."""
    started = time.perf_counter_ns()
    if variant not in TOPK_VARIANTS:
        raise ConfigurationError(f"unknown topk variant {variant!r}; expected {TOPK_VARIANTS}")
    if k < 0:
        raise ConfigurationError("k must be non-negative")
    forest = instance.forest
    scores: dict[int, float] = {}
    for c in instance.candidates:
        if variant == "freq":
            scores[c] = sum(
                1.0
                for r in forest.roots
                if r.eq == c or forest.is_ancestor(r.eq, c)
            )
        elif variant == "utility":
            single = costmodel._selection_costs(
                forest, frozenset({c}), [r.eq for r in forest.roots], instance.cost
            )
            scores[c] = max(
                (r.weight * (instance.cost.ex_cost[r.eq] - single[r.eq]) for r in forest.roots),
                default=0.0,
            )
        elif variant == "total_utility":
            scores[c] = instance.benefit({c})
        else:  # norm_total_utility
            b = instance.benefit({c})
            e = expense_mod.candidate_expense(
                instance.expense, forest, c, frozenset({c}), instance.cost
            )
            scores[c] = b / e if e > 0 else (math.inf if b > 0 else 0.0)
    ranked = sorted(instance.candidates, key=lambda c: (-scores[c], c))
    chosen = list(ranked[:k])
    while chosen and not instance.feasible(chosen):
        chosen.pop()  # drop the lowest-scored tail item
    return _make_report(
        instance, "topk", chosen, len(instance.candidates), seed, started,
        extras={"variant": variant, "k": k, "scores": {c: scores[c] for c in sorted(scores)}},
    )


# -- greedy -----------------------------------------------------------------


def _greedy_loop(
    instance: CspInstance,
    score: str,
    start: frozenset[int],
    counters: dict[str, int],
) -> frozenset[int]:
    """One greedy climb; `score` is 'ratio' (benefit per expense) or 'benefit'.

    Marginals are cached per candidate and recomputed only for ancestors
    and descendants of the last pick (benefit interactions travel along
    derivation chains). Falls back to full recomputation when the
    closure is unavailable for very large forests.
    """
    forest = instance.forest
    chosen = set(start)
    remaining = [c for c in instance.candidates if c not in chosen]
    base_benefit = instance.benefit(chosen)
    base_expense = instance.expense_of(chosen)
    try:
        forest._ensure_closure()
        have_closure = True
    except ResourceLimitError:
        have_closure = False
    cache: dict[int, tuple[float, float]] = {}
    stale = set(remaining)
    while True:
        for c in remaining:
            if c in stale or c not in cache:
                total = instance.expense_of(chosen | {c})
                benefit = instance.benefit(chosen | {c})
                cache[c] = (benefit - base_benefit, total - base_expense)
                counters["benefit_evaluations"] += 1
        stale.clear()
        best_c = None
        best_key: tuple[float, float] | None = None
        for c in remaining:
            db, de = cache[c]
            # feasibility re-derived every round: the budget keeps filling
            if not instance.budget.feasible(base_expense + de) or db <= _TIE_TOL:
                continue
            if score == "ratio":
                # zero/negative expense delta ranks as free, keyed by benefit
                key = (math.inf, db) if de <= _TIE_TOL else (db / de, db)
            else:
                key = (db, db)
            if best_key is None or key > best_key:
                best_key = key
                best_c = c
        if best_c is None:
            return frozenset(chosen)
        chosen.add(best_c)
        remaining.remove(best_c)
        base_benefit = instance.benefit(chosen)
        base_expense = instance.expense_of(chosen)
        counters["rounds"] += 1
        if have_closure:
            stale = {
                c
                for c in remaining
                if forest.is_ancestor(best_c, c) or forest.is_ancestor(c, best_c)
            }
        else:
            stale = set(remaining)


def greedy(instance: CspInstance, seed: int = 0) -> AlgorithmReport:
    """Marginal-ratio greedy with a benefit-greedy run and best-single guard.

    The ratio loop repeatedly adds the feasible candidate with the best
    benefit change per expense change. A max-marginal-benefit loop and
    the best single feasible candidate guard against the knapsack
    blocking pathology; the best of the three is returned.
    """
    started = time.perf_counter_ns()
    counters = {"benefit_evaluations": 0, "rounds": 0}
    outcomes: list[tuple[str, frozenset[int]]] = [
        ("ratio", _greedy_loop(instance, "ratio", frozenset(), counters)),
        ("benefit", _greedy_loop(instance, "benefit", frozenset(), counters)),
    ]
    best_single: tuple[float, float, tuple[int, ...]] | None = None
    for c in instance.candidates:
        counters["benefit_evaluations"] += 1
        total = instance.expense_of({c})
        if not instance.budget.feasible(total):
            continue
        if _better(instance.benefit({c}), total, (c,), best_single):
            best_single = (instance.benefit({c}), total, (c,))
    outcomes.append(("single", frozenset(best_single[2]) if best_single else frozenset()))
    best: tuple[float, float, tuple[int, ...]] | None = None
    variant = "ratio"
    for name, sel in outcomes:
        b, e = instance.benefit(sel), instance.expense_of(sel)
        if _better(b, e, tuple(sorted(sel)), best):
            best = (b, e, tuple(sorted(sel)))
            variant = name
    assert best is not None
    return _make_report(
        instance, "greedy", best[2], counters["rounds"], seed, started,
        extras={"variant": variant, **counters},
    )


def greedy_mk(
    instance: CspInstance, m_cap: int = 200_000, k: int = 0, seed: int = 0
) -> AlgorithmReport:
    """Exhaustive best seed of size <= k, extended greedily.

    Also compared against plain greedy (the degenerate empty seed), so
    the result never falls below it.
    """
    started = time.perf_counter_ns()
    cand = instance.candidates
    n = len(cand)
    if k > n:
        raise ConfigurationError(f"seed size {k} exceeds candidate count {n}")
    n_subsets = sum(math.comb(n, i) for i in range(k + 1))
    if n_subsets > m_cap:
        raise ResourceLimitError(
            f"greedy(m,k) seed enumeration needs {n_subsets} subsets (cap {m_cap})"
        )
    best_seed: tuple[float, float, tuple[int, ...]] | None = None
    for size in range(k + 1):
        for combo in itertools.combinations(cand, size):
            total = instance.expense_of(combo)
            if not instance.budget.feasible(total):
                continue
            benefit = instance.benefit(combo)
            if _better(benefit, total, combo, best_seed):
                best_seed = (benefit, total, combo)
    assert best_seed is not None
    counters = {"benefit_evaluations": 0, "rounds": 0}
    extended = _greedy_loop(instance, "ratio", frozenset(best_seed[2]), counters)
    plain = greedy(instance, seed=seed)
    ext_benefit, ext_expense = instance.benefit(extended), instance.expense_of(extended)
    if _better(plain.benefit, plain.expense, plain.selection,
               (ext_benefit, ext_expense, tuple(sorted(extended)))):
        choice: Iterable[int] = plain.selection
    else:
        choice = extended
    return _make_report(
        instance, "greedy_mk", choice, counters["rounds"], seed, started,
        extras={"k": k, "seed_subsets": n_subsets, "seed": list(best_seed[2])},
    )


# -- level-order space reduction ---------------------------------------------


def level_order_filter(forest: ExpressionForest, table=None) -> frozenset[int]:
    """Keep, per query, only the depth level with the best summed benefits.

    Depth is the longest eq-path from the root, so two retained nodes of
    one query are never in an ancestor/descendant relation. The filter
    deliberately ignores the budget.
    """
    if table is None:
        table = costmodel.ex_costs(forest)
    single_benefit: dict[int, float] = {}

    def benefit_of(c: int) -> float:
        if c not in single_benefit:
            single_benefit[c] = costmodel.workload_benefit(forest, frozenset({c}), table)
        return single_benefit[c]

    retained: set[int] = set()
    order = forest.topo_order()
    for root in forest.roots:
        depth: dict[int, int] = {root.eq: 0}
        for node in reversed(order):  # ancestors first: longest path propagates
            if node not in depth:
                continue
            for child in forest.eq_children(node):
                d = depth[node] + 1
                if depth.get(child, -1) < d:
                    depth[child] = d
        levels: dict[int, list[int]] = {}
        for c in sorted(forest.candidate_mask):
            if c in depth:
                levels.setdefault(depth[c], []).append(c)
        if not levels:
            continue
        best_depth = max(levels, key=lambda d: (sum(benefit_of(c) for c in levels[d]), -d))
        retained.update(levels[best_depth])
    return frozenset(retained)


# -- A*-like exact search -----------------------------------------------------


def astar(instance: CspInstance, cap: int = 18, seed: int = 0) -> AlgorithmReport:
    """Best-first search over candidate decisions in topological order.

    State score is the workload time with the decided prefix fixed and
    every undecided candidate hypothetically reusable (an admissible
    lower bound on any completion), so the first feasible goal popped is
    exact. For static expense, a popped state whose select-all-remaining
    completion fits the budget jumps straight to that goal.
    """
    started = time.perf_counter_ns()
    forest = instance.forest
    cand_set = set(live_candidates(instance))
    order = [c for c in forest.topo_order() if c in cand_set]
    n = len(order)
    if n > cap:
        raise ResourceLimitError(f"A* search capped at {cap} candidates, got {n}")
    roots = [r.eq for r in forest.roots]
    static = instance.expense.kind == "static"
    sizes = {c: forest.eq_nodes[c].size for c in order}
    suffix_size = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_size[i] = suffix_size[i + 1] + sizes[order[i]]

    def optimistic_time(i: int, sel: frozenset[int]) -> float:
        z = sel | frozenset(order[i:])
        costs = costmodel._selection_costs(forest, z, roots, instance.cost)
        return sum(r.weight * costs[r.eq] for r in forest.roots)

    expanded = 0
    counter = 0
    start_f = optimistic_time(0, frozenset())
    heap: list[tuple[float, int, int, tuple[int, ...]]] = [(start_f, n, counter, ())]
    best_goal: tuple[int, ...] | None = None
    while heap:
        f, depth_key, _, sel_tuple = heapq.heappop(heap)
        i = n - depth_key
        sel = frozenset(sel_tuple)
        if i == n:
            if instance.feasible(sel):
                best_goal = sel_tuple
                break
            continue
        expanded += 1
        if static:
            sel_expense = sum(sizes[c] for c in sel_tuple)
            if instance.budget.feasible(sel_expense + suffix_size[i]):
                # the optimistic completion is realizable: f is its exact time
                counter += 1
                heapq.heappush(heap, (f, 0, counter, tuple(sorted(sel | set(order[i:])))))
                continue
        c = order[i]
        skip_f = optimistic_time(i + 1, sel)
        counter += 1
        heapq.heappush(heap, (skip_f, n - (i + 1), counter, sel_tuple))
        if not static or instance.budget.feasible(
            sum(sizes[x] for x in sel_tuple) + sizes[c]
        ):
            take = tuple(sorted(sel | {c}))
            take_f = optimistic_time(i + 1, frozenset(take))
            counter += 1
            heapq.heappush(heap, (take_f, n - (i + 1), counter, take))
    assert best_goal is not None  # the all-unselected goal is always feasible
    return _make_report(
        instance, "astar", best_goal, expanded, seed, started,
        extras={"expanded": expanded},
    )


# -- randomized algorithms ----------------------------------------------------


def random_sampling(
    instance: CspInstance, trials: int = 100, seed: int = 0, trace: bool = False
) -> AlgorithmReport:
    """Uniformly sample selection bit strings, keep the best feasible one."""
    started = time.perf_counter_ns()
    if trials < 1:
        raise ConfigurationError("trials must be at least 1")
    rng = random.Random(seed)
    cand = instance.candidates
    best: tuple[float, float, tuple[int, ...]] | None = None
    history: list[tuple[float, float]] = []
    for _ in range(trials):
        sel = tuple(c for c in cand if rng.random() < 0.5)
        total = instance.expense_of(sel)
        benefit = instance.benefit(sel)
        if trace:
            history.append((benefit, total))
        if instance.budget.feasible(total) and _better(benefit, total, sel, best):
            best = (benefit, total, sel)
    selection = best[2] if best is not None else ()
    return _make_report(
        instance, "random_sampling", selection, trials, seed, started,
        trace=history if trace else None,
    )


_LOCAL_MODES = ("II", "SA", "2PO")


def _propose(
    rng: random.Random, current: frozenset[int], cand: Sequence[int], neighborhood: str
) -> frozenset[int]:
    if neighborhood == "flip":
        c = cand[rng.randrange(len(cand))]
        return current ^ {c}
    inside = sorted(current)
    outside = [c for c in cand if c not in current]
    actions = []
    if outside:
        actions.append("add")
    if inside:
        actions.append("remove")
    if inside and outside:
        actions.append("swap")
    if not actions:
        return current
    action = actions[rng.randrange(len(actions))]
    if action == "add":
        return current | {outside[rng.randrange(len(outside))]}
    if action == "remove":
        return current - {inside[rng.randrange(len(inside))]}
    drop = inside[rng.randrange(len(inside))]
    gain = outside[rng.randrange(len(outside))]
    return (current - {drop}) | {gain}


class _SearchBudget:
    def __init__(self, max_evals: int | None):
        self.max_evals = max_evals
        self.used = 0

    def take(self) -> bool:
        if self.max_evals is not None and self.used >= self.max_evals:
            return False
        self.used += 1
        return True


def _anneal(
    instance: CspInstance,
    rng: random.Random,
    start: frozenset[int],
    temperatures: Iterable[float],
    steps_per_temp: int,
    neighborhood: str,
    budget: _SearchBudget,
    penalized: Callable[[frozenset[int]], float],
    best_tracker: list[tuple[float, float, tuple[int, ...]] | None],
    history: list[tuple[float, float]] | None,
    stall_limit: int | None = None,
) -> frozenset[int]:
    """Shared II/SA walk. II is the T=0 schedule.

    The acceptance uniform is drawn for every non-improving proposal,
    even at T=0, so an SA run with T -> 0 consumes the same rng stream as
    II and reproduces its trajectory exactly. Plateau moves are rejected.
    """
    cand = instance.candidates
    current = start
    current_score = penalized(current)
    _track(instance, current, best_tracker)
    stall = 0
    for temp in temperatures:
        for _ in range(steps_per_temp):
            if not budget.take():
                return current
            proposal = _propose(rng, current, cand, neighborhood)
            delta = penalized(proposal) - current_score
            if delta > _TIE_TOL:
                accept = True
            else:
                u = rng.random()  # always drawn: keeps II/SA streams aligned
                accept = delta < -_TIE_TOL and temp > 0.0 and u < math.exp(delta / temp)
            if accept:
                current = proposal
                current_score += delta
                _track(instance, current, best_tracker)
                stall = 0
            else:
                stall += 1
                if stall_limit is not None and stall >= stall_limit:
                    return current
            if history is not None:
                benefit = instance.benefit(current)
                history.append((benefit, instance.expense_of(current)))
    return current


def _track(
    instance: CspInstance,
    state: frozenset[int],
    best_tracker: list[tuple[float, float, tuple[int, ...]] | None],
) -> None:
    total = instance.expense_of(state)
    if not instance.budget.feasible(total):
        return
    benefit = instance.benefit(state)
    sel = tuple(sorted(state))
    if _better(benefit, total, sel, best_tracker[0]):
        best_tracker[0] = (benefit, total, sel)


def default_t0(instance: CspInstance) -> float:
    """Initial SA temperature: the greedy benefit, or 1 when it is zero."""
    b = greedy(instance).benefit
    return b if b > 0 else 1.0


def local_search(
    instance: CspInstance,
    mode: str,
    params: dict[str, Any] | None = None,
    seed: int = 0,
    trace: bool = False,
) -> AlgorithmReport:
    """Iterative improvement, simulated annealing, or two-phase optimization.

    Moves are scored by penalized benefit; the best feasible state seen
    anywhere is reported. Parameters: neighborhood ("kalnis" add/swap/
    remove or "flip"), restarts (II), t0/alpha/steps_per_temp/t_min (SA),
    max_evals (shared proposal budget), start ("empty" or "random").
    """
    started = time.perf_counter_ns()
    mode = mode.upper()
    if mode not in _LOCAL_MODES:
        raise ConfigurationError(f"unknown local search mode {mode!r}; expected {_LOCAL_MODES}")
    p = dict(params or {})
    neighborhood = p.get("neighborhood", "kalnis")
    if neighborhood not in ("kalnis", "flip"):
        raise ConfigurationError(f"unknown neighborhood {neighborhood!r}")
    alpha = float(p.get("alpha", 0.95))
    if not (0.0 < alpha < 1.0):
        raise ConfigurationError(f"cooling factor alpha must lie in (0, 1), got {alpha}")
    steps_per_temp = int(p.get("steps_per_temp", 50))
    t_min = float(p.get("t_min", 1e-2))
    restarts = int(p.get("restarts", 3))
    max_evals = p.get("max_evals")
    budget = _SearchBudget(int(max_evals) if max_evals is not None else None)
    rng = random.Random(seed)
    cand = instance.candidates
    resolved = instance.resolved_budget()

    score_cache: dict[frozenset[int], float] = {}

    def penalized(sel: frozenset[int]) -> float:
        if sel not in score_cache:
            score_cache[sel] = expense_mod.penalized_benefit(
                instance.benefit(sel), instance.expense, instance.forest, sel,
                resolved, instance.cost,
            )
        return score_cache[sel]

    def start_state(first: bool) -> frozenset[int]:
        if first and p.get("start", "empty") == "empty":
            return frozenset()
        return frozenset(c for c in cand if rng.random() < 0.5)

    def sa_temperatures(t0: float) -> Iterable[float]:
        t = t0
        while t > t_min:
            yield t
            t *= alpha
        if t0 <= t_min:  # degenerate schedules still run one level
            yield t0

    best_tracker: list[tuple[float, float, tuple[int, ...]] | None] = [None]
    history: list[tuple[float, float]] | None = [] if trace else None
    stall_limit = p.get("stall", 8 * max(1, len(cand)) + 16)
    stall_limit = int(stall_limit) if stall_limit is not None else None

    if mode == "II":
        for r in range(max(1, restarts)):
            _anneal(
                instance, rng, start_state(r == 0), [0.0], 10**9, neighborhood,
                budget, penalized, best_tracker, history, stall_limit,
            )
            if budget.max_evals is not None and budget.used >= budget.max_evals:
                break
    elif mode == "SA":
        t0 = float(p["t0"]) if p.get("t0") is not None else default_t0(instance)
        _anneal(
            instance, rng, start_state(True), sa_temperatures(t0), steps_per_temp,
            neighborhood, budget, penalized, best_tracker, history,
        )
    else:  # 2PO: iterative improvement converges, annealing explores from there
        ii_end = frozenset()
        for r in range(max(1, restarts)):
            ii_end = _anneal(
                instance, rng, start_state(r == 0), [0.0], 10**9, neighborhood,
                budget, penalized, best_tracker, history, stall_limit,
            )
            if budget.max_evals is not None and budget.used >= budget.max_evals:
                break
        if best_tracker[0] is not None:
            ii_end = frozenset(best_tracker[0][2])
        t0 = float(p["t0"]) if p.get("t0") is not None else default_t0(instance)
        _anneal(
            instance, rng, ii_end, sa_temperatures(t0), steps_per_temp,
            neighborhood, budget, penalized, best_tracker, history,
        )
    selection = best_tracker[0][2] if best_tracker[0] is not None else ()
    return _make_report(
        instance, mode.lower(), selection, budget.used, seed, started,
        trace=history,
        extras={"neighborhood": neighborhood},
    )


# -- genetic search -----------------------------------------------------------


def or_choice_points(forest: ExpressionForest) -> list[tuple[int, int]]:
    """(eq id, alternative count) for every node with multiple producers."""
    return [
        (eq.id, len(eq.producers)) for eq in forest.eq_nodes if len(eq.producers) > 1
    ]


def genetic(
    instance: CspInstance,
    params: dict[str, Any] | None = None,
    seed: int = 0,
    trace: bool = False,
) -> AlgorithmReport:
    """Genetic search over (view string, query-plan string) individuals.

    Crossover cuts-and-swaps vs and qps independently; mutation flips one
    random position of either string. Fitness is the penalized benefit of
    the selection evaluated under the plan alternatives pinned by qps.
    Selection keeps the best by fitness, or runs stochastic-ranking
    bubble passes when configured.
    """
    started = time.perf_counter_ns()
    p = dict(params or {})
    pop_size = int(p.get("population_size", 16))
    if pop_size < 2:
        raise ConfigurationError("population size must be at least 2")
    generations = int(p.get("generations", 40))
    mutation_rate = float(p.get("mutation_rate", 0.3))
    crossover_rate = float(p.get("crossover_rate", 0.8))
    selection_mode = p.get("selection", "benefit")
    sr_p = float(p.get("sr_p", 0.45))
    refine = bool(p.get("refine", False))
    if selection_mode not in ("benefit", "stochastic_ranking"):
        raise ConfigurationError(f"unknown selection mode {selection_mode!r}")
    rng = random.Random(seed)
    cand = instance.candidates
    points = or_choice_points(instance.forest)
    resolved = instance.resolved_budget()

    def random_individual() -> Individual:
        vs = tuple(1 if rng.random() < 0.5 else 0 for _ in cand)
        qps = tuple(rng.randrange(count) for _, count in points)
        return Individual(vs=vs, qps=qps)

    fitness_cache: dict[Individual, tuple[float, float, float]] = {}

    def evaluate(ind: Individual) -> tuple[float, float, float]:
        """(fitness, raw qps benefit, expense)."""
        if ind not in fitness_cache:
            sel = frozenset(c for c, bit in zip(cand, ind.vs) if bit)
            choices = {eq: idx for (eq, _), idx in zip(points, ind.qps)}
            benefit = costmodel.workload_benefit(
                instance.forest, sel, instance.cost, choices=choices
            )
            total = instance.expense_of(sel)
            overflow = max(0.0, total - resolved.limit)
            fitness_cache[ind] = (benefit - resolved.penalty_r * overflow, benefit, total)
        return fitness_cache[ind]

    def crossover(a: Individual, b: Individual) -> Individual:
        vs_a, vs_b = list(a.vs), list(b.vs)
        if len(vs_a) >= 2:
            cut = rng.randrange(1, len(vs_a))
            vs_a = vs_a[:cut] + vs_b[cut:]
        qps_a, qps_b = list(a.qps), list(b.qps)
        if len(qps_a) >= 2:
            cut = rng.randrange(1, len(qps_a))
            qps_a = qps_a[:cut] + qps_b[cut:]
        return Individual(vs=tuple(vs_a), qps=tuple(qps_a))

    def mutate(ind: Individual) -> Individual:
        positions = len(ind.vs) + len(ind.qps)
        if positions == 0:
            return ind
        pos = rng.randrange(positions)
        if pos < len(ind.vs):
            vs = list(ind.vs)
            vs[pos] = 1 - vs[pos]
            return Individual(vs=tuple(vs), qps=ind.qps)
        qps = list(ind.qps)
        idx = pos - len(ind.vs)
        count = points[idx][1]
        if count > 1:
            shift = rng.randrange(1, count)
            qps[idx] = (qps[idx] + shift) % count
        return Individual(vs=ind.vs, qps=tuple(qps))

    def hill_climb(ind: Individual) -> Individual:
        current = ind
        for _ in range(2 * max(1, len(cand))):
            pos = rng.randrange(max(1, len(current.vs)))
            vs = list(current.vs)
            if not vs:
                break
            vs[pos] = 1 - vs[pos]
            challenger = Individual(vs=tuple(vs), qps=current.qps)
            if evaluate(challenger)[0] > evaluate(current)[0] + _TIE_TOL:
                current = challenger
        return current

    def select(pool: list[Individual]) -> list[Individual]:
        if selection_mode == "benefit":
            return sorted(pool, key=lambda i: (-evaluate(i)[0], i.vs, i.qps))[:pop_size]
        items = list(pool)
        for _ in range(len(items)):  # bubble passes until no swap occurs
            swapped = False
            for j in range(len(items) - 1):
                a_scores = evaluate(items[j])[1:]
                b_scores = evaluate(items[j + 1])[1:]
                if expense_mod.stochastic_compare(b_scores, a_scores, sr_p, rng) < 0:
                    items[j], items[j + 1] = items[j + 1], items[j]
                    swapped = True
            if not swapped:
                break
        return items[:pop_size]

    initial = p.get("initial")
    if initial is not None:
        population = [ind if isinstance(ind, Individual) else Individual(*ind) for ind in initial]
    else:
        population = [random_individual() for _ in range(pop_size)]

    best_tracker: list[tuple[float, float, tuple[int, ...]] | None] = [None]
    history: list[tuple[float, float]] = []

    def track(ind: Individual) -> None:
        _, benefit, total = evaluate(ind)
        if not instance.budget.feasible(total):
            return
        sel = tuple(sorted(c for c, bit in zip(cand, ind.vs) if bit))
        if _better(benefit, total, sel, best_tracker[0]):
            best_tracker[0] = (benefit, total, sel)

    for ind in population:
        track(ind)
    for _ in range(generations):
        offspring: list[Individual] = []
        for _ in range(pop_size):
            if len(population) >= 2:
                a, b = rng.sample(range(len(population)), 2)
                pa, pb = population[a], population[b]
            else:
                pa = pb = population[0]
            child = crossover(pa, pb) if rng.random() < crossover_rate else pa
            if rng.random() < mutation_rate:
                child = mutate(child)
            if refine:
                child = hill_climb(child)
            offspring.append(child)
            track(child)
        population = select(population + offspring)
        if trace and population:
            _, benefit, total = evaluate(population[0])
            history.append((benefit, total))
    selection = best_tracker[0][2] if best_tracker[0] is not None else ()
    return _make_report(
        instance, "genetic", selection, generations, seed, started,
        trace=history if trace else None,
        extras={"choice_points": len(points)},
    )


# -- iterative flip (the linear-stats iterative scheme) ------------------------


FlipPolicy = Callable[[list[float], list[float], int], list[float]]


def iterative_flip(
    instance: CspInstance,
    iterations: int = 200,
    seed: int = 0,
    flip_params: dict[str, Any] | None = None,
    trace: bool = False,
) -> AlgorithmReport:
    """Iterative randomized selection with linear-time reuse statistics.

    Each iteration (a) draws every selection bit independently from its
    flip probability and repairs to feasibility by dropping the lowest
    utility-per-expense candidates, (b) computes the reused set, reuse
    counts and exact benefit with the linear-time reuse oracle (replacing
    the exponential ILP step), and (c) moves flip probabilities toward
    the normalized per-expense utility signal with multiplicative
    smoothing and annealed step size. The best feasible iterate wins.

    flip_params: p_init (0.5), eta (0.25), eta_decay (0.995), p_floor
    (0.02), p_ceil (0.98), policy (optional callable replacing the
    built-in update; the reinforcement-learning slot, ships empty).
    """
    started = time.perf_counter_ns()
    if iterations < 1:
        raise ConfigurationError("iterations must be at least 1")
    if not instance.forest.is_and_forest():
        raise UnsupportedStructureError("iterative_flip requires an AND-forest")
    p = dict(flip_params or {})
    p_init = float(p.get("p_init", 0.5))
    eta = float(p.get("eta", 0.25))
    eta_decay = float(p.get("eta_decay", 0.995))
    p_floor = float(p.get("p_floor", 0.02))
    p_ceil = float(p.get("p_ceil", 0.98))
    policy: FlipPolicy | None = p.get("policy")
    rng = random.Random(seed)
    forest = instance.forest
    cand = instance.candidates
    index = {c: i for i, c in enumerate(cand)}
    table = instance.cost
    flows = costmodel.flow_counts(forest)
    e_single = {
        c: expense_mod.candidate_expense(instance.expense, forest, c, frozenset({c}), table)
        for c in cand
    }
    utility = [
        max(0.0, table.unit_benefit[c]) * flows[c] / max(e_single[c], 1e-12) for c in cand
    ]
    probs = [min(p_ceil, max(p_floor, p_init)) if 0 < p_init < 1 else p_init for _ in cand]
    static = instance.expense.kind == "static"

    def repair(selected: set[int], u: Sequence[float]) -> None:
        if static:
            total = sum(forest.eq_nodes[c].size for c in selected)
            if instance.budget.feasible(total):
                return
            order = sorted(selected, key=lambda c: (u[index[c]], c))
            for c in order:
                selected.discard(c)
                total -= forest.eq_nodes[c].size
                if instance.budget.feasible(total):
                    return
            return
        while selected and not instance.budget.feasible(instance.expense_of(selected)):
            victim = min(sorted(selected), key=lambda c: (u[index[c]], c))
            selected.discard(victim)

    best: tuple[float, float, tuple[int, ...]] | None = None
    history: list[tuple[float, float]] = []
    total_visits = 0
    step = eta
    for t in range(iterations):
        selected = {c for c, prob in zip(cand, probs) if rng.random() < prob}
        repair(selected, utility)
        state: SelectionState = costmodel.reuse_oracle(forest, frozenset(selected), table)
        total_visits += state.visits
        total = instance.expense_of(selected)
        state.total_expense = total
        sel_tuple = tuple(sorted(selected))
        if instance.budget.feasible(total) and _better(state.total_benefit, total, sel_tuple, best):
            best = (state.total_benefit, total, sel_tuple)
        if trace:
            history.append((state.total_benefit, total))
        for i, c in enumerate(cand):
            if c in selected:
                utility[i] = (
                    max(0.0, table.unit_benefit[c])
                    * state.n_reuses.get(c, 0.0)
                    / max(e_single[c], 1e-12)
                )
        u_max = max(utility, default=0.0)
        normalized = [u / u_max if u_max > 0 else 0.0 for u in utility]
        if policy is not None:
            probs = policy(probs, normalized, t)
        else:
            probs = [
                min(p_ceil, max(p_floor, (1.0 - step) * prob + step * sig))
                for prob, sig in zip(probs, normalized)
            ]
        step *= eta_decay
    selection = best[2] if best is not None else ()
    return _make_report(
        instance, "iterative_flip", selection, iterations, seed, started,
        trace=history if trace else None,
        extras={"oracle_visits": total_visits},
    )
