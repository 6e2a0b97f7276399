"""Command-line front end: instance generation, solving, benchmarking.

Exit codes: 0 success, 2 input error, 3 resource cap exceeded,
4 internal invariant failure. MQO_SELECT_THREADS caps bench workers
(0 = auto). All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any

from . import algorithms, instances, oracle
from .errors import (
    ConfigurationError,
    InconsistentInputError,
    MalformedInputError,
    ResourceLimitError,
    UnsupportedStructureError,
)
from .expense import Budget, ExpenseModel
from .forest import forest_from_payload
from .problem import CspInstance

_INPUT_ERRORS = (
    MalformedInputError,
    InconsistentInputError,
    ConfigurationError,
    UnsupportedStructureError,
    ValueError,
    KeyError,
    json.JSONDecodeError,
    OSError,
)

ALGORITHMS = (
    "exhaustive",
    "astar",
    "greedy",
    "greedy_mk",
    "topk",
    "random_sampling",
    "ii",
    "sa",
    "2po",
    "genetic",
    "iterative_flip",
)


def instance_extras(instance: CspInstance, provenance: dict | None = None) -> dict[str, Any]:
    extras: dict[str, Any] = {
        "expense": {
            "kind": instance.expense.kind,
            "delta": instance.expense.delta,
            "rho": instance.expense.rho,
        },
        "budget": instance.budget.limit if math.isfinite(instance.budget.limit) else None,
        "penalty_r": instance.budget.penalty_r,
    }
    if provenance is not None:
        extras["provenance"] = provenance
    return extras


def write_instance(instance: CspInstance, path: str, provenance: dict | None = None) -> None:
    text = instance.forest.to_canonical_text(instance_extras(instance, provenance))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_instance(path: str) -> CspInstance:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    forest = forest_from_payload(payload)
    exp_raw = payload.get("expense") or {}
    expense = ExpenseModel(
        kind=exp_raw.get("kind", "static"),
        delta=float(exp_raw.get("delta", 1.0)),
        rho=float(exp_raw.get("rho", 0.0)),
    )
    raw_budget = payload.get("budget")
    limit = float(raw_budget) if raw_budget is not None else math.inf
    raw_r = payload.get("penalty_r")
    budget = Budget(limit=limit, penalty_r=float(raw_r) if raw_r is not None else None)
    return CspInstance.build(forest, expense, budget)


# -- gen -----------------------------------------------------------------------


def _parse_knapsack(tokens: list[str]) -> instances.KnapsackInstance:
    fields: dict[str, str] = {}
    for token in tokens:
        if "=" not in token:
            raise MalformedInputError(f"knapsack token {token!r}: expected key=value")
        key, value = token.split("=", 1)
        fields[key] = value
    for key in ("v", "w", "W"):
        if key not in fields:
            raise MalformedInputError(f"knapsack spec: missing {key}=...")
    values = tuple(float(x) for x in fields["v"].split(","))
    weights = tuple(float(x) for x in fields["w"].split(","))
    return instances.KnapsackInstance(values=values, weights=weights, capacity=float(fields["W"]))


def cmd_gen(args: argparse.Namespace) -> int:
    chosen = [bool(args.fixture), args.random, bool(args.knapsack)]
    if sum(chosen) != 1:
        raise MalformedInputError("gen: give exactly one of --fixture, --random, --knapsack")
    provenance: dict | None = None
    if args.fixture:
        params: dict[str, float] = {}
        if args.epsilon is not None:
            params["epsilon"] = args.epsilon
        if args.epsilon1 is not None:
            params["epsilon1"] = args.epsilon1
        if args.epsilon2 is not None:
            params["epsilon2"] = args.epsilon2
        if args.budget is not None:
            params["budget"] = args.budget
        instance = instances.fixture(args.fixture, **params)
        provenance = {"generator": "fixture", "name": args.fixture, "params": params}
    elif args.random:
        config = instances.GeneratorConfig(
            n_eq=(args.nodes, args.nodes),
            fan_in=(1, args.fan_in_max),
            or_prob=args.or_prob,
            leaf_prob=args.leaf_prob,
            size_range=(1, args.size_max),
            op_cost_range=(1, args.op_cost_max),
            budget_fraction=args.budget_fraction,
            seed=args.seed,
        )
        instance = instances.random_forest(config)
        provenance = instances.provenance(config)
    else:
        k = _parse_knapsack(args.knapsack)
        instance = instances.knapsack_reduction(k)
        provenance = {
            "generator": "knapsack_reduction",
            "params": {"v": list(k.values), "w": list(k.weights), "W": k.capacity},
        }
    write_instance(instance, args.output, provenance)
    forest = instance.forest
    print(
        f"instance: eq_nodes={forest.n_eq()} op_nodes={len(forest.op_nodes)} "
        f"roots={len(forest.roots)} candidates={len(instance.candidates)} "
        f"budget={instance.budget.limit}"
    )
    for c in instance.candidates:
        eq = forest.eq_nodes[c]
        print(
            f"candidate {eq.label} id={c} size={eq.size:g} "
            f"unit_benefit={instance.cost.unit_benefit[c]:g}"
        )
    return 0


# -- solve ---------------------------------------------------------------------


def run_algorithm(
    instance: CspInstance, algo: str, seed: int, params: dict[str, Any], trace: bool = False
) -> algorithms.AlgorithmReport:
    if algo == "exhaustive":
        return algorithms.exhaustive(instance, cap=int(params.get("cap", 20)), seed=seed)
    if algo == "astar":
        return algorithms.astar(instance, cap=int(params.get("cap", 18)), seed=seed)
    if algo == "greedy":
        return algorithms.greedy(instance, seed=seed)
    if algo == "greedy_mk":
        return algorithms.greedy_mk(
            instance,
            m_cap=int(params.get("m_cap", 200_000)),
            k=int(params.get("k", 0)),
            seed=seed,
        )
    if algo == "topk":
        return algorithms.topk(
            instance,
            variant=params.get("variant", "total_utility"),
            k=int(params.get("k", len(instance.candidates))),
            seed=seed,
        )
    if algo == "random_sampling":
        return algorithms.random_sampling(
            instance, trials=int(params.get("trials", 100)), seed=seed, trace=trace
        )
    if algo in ("ii", "sa", "2po"):
        return algorithms.local_search(instance, mode=algo, params=params, seed=seed, trace=trace)
    if algo == "genetic":
        return algorithms.genetic(instance, params=params, seed=seed, trace=trace)
    if algo == "iterative_flip":
        return algorithms.iterative_flip(
            instance,
            iterations=int(params.get("iterations", 200)),
            seed=seed,
            flip_params=params.get("flip", params),
            trace=trace,
        )
    raise ConfigurationError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")


def _apply_overrides(instance: CspInstance, args: argparse.Namespace) -> CspInstance:
    expense = instance.expense
    if args.expense_kind is not None:
        expense = ExpenseModel(
            kind=args.expense_kind,
            delta=args.delta if args.delta is not None else expense.delta,
            rho=args.rho if args.rho is not None else expense.rho,
        )
    elif args.delta is not None or args.rho is not None:
        expense = ExpenseModel(
            kind=expense.kind,
            delta=args.delta if args.delta is not None else expense.delta,
            rho=args.rho if args.rho is not None else expense.rho,
        )
    limit = args.budget if args.budget is not None else instance.budget.limit
    penalty_r = args.penalty_r if args.penalty_r is not None else instance.budget.penalty_r
    return CspInstance.build(instance.forest, expense, Budget(limit=limit, penalty_r=penalty_r))


def report_text(report: algorithms.AlgorithmReport, include_elapsed: bool = True) -> str:
    return json.dumps(report.to_payload(include_elapsed=include_elapsed), indent=2) + "\n"


def cmd_solve(args: argparse.Namespace) -> int:
    instance = _apply_overrides(load_instance(args.input), args)
    algo = args.algo
    seed = args.seed
    params = json.loads(args.params) if args.params else {}
    if args.config:
        # full configuration object: {"algo": name, "seed": int, "params": {...}}
        config = json.loads(args.config)
        algo = config.get("algo", algo)
        seed = config.get("seed", seed)
        params = {**params, **config.get("params", {})}
    if algo is None:
        raise MalformedInputError("solve: give --algo or a --config with an 'algo' key")
    if seed is None:
        print("warning: --seed not given; defaulting to 0", file=sys.stderr)
        seed = 0
    report = run_algorithm(instance, algo, seed, params, trace=args.trace)
    text = report_text(report)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report.feasible else 1


# -- bench ---------------------------------------------------------------------


def _worker_count() -> int:
    raw = os.environ.get("MQO_SELECT_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"MQO_SELECT_THREADS must be an integer, got {raw!r}")
    if value < 0:
        raise ConfigurationError("MQO_SELECT_THREADS must be non-negative")
    if value == 0:
        return min(8, os.cpu_count() or 1)
    return value


def _bench_cell(
    path: str, algo: str, seed: int, params: dict[str, Any], want_oracle: bool, oracle_cap: int
) -> dict[str, Any]:
    instance = load_instance(path)
    report = run_algorithm(instance, algo, seed, params)
    row: dict[str, Any] = {
        "instance": path,
        "algo": algo,
        "seed": seed,
        "benefit": report.benefit,
        "expense": report.expense,
        "feasible": report.feasible,
        "iterations": report.iterations,
        "elapsed_ns": report.elapsed_ns,
        "visits": report.extras.get("oracle_visits", ""),
    }
    if want_oracle:
        optimum = oracle.brute_force_select(instance, cap=oracle_cap).optimum
        row["optimum"] = optimum
        row["ratio"] = report.benefit / optimum if optimum > 0 else 1.0
    return row


def cmd_bench(args: argparse.Namespace) -> int:
    if not args.seeds:
        raise MalformedInputError("bench: --seeds is required (reproducibility first)")
    paths = [p for p in args.instances.split(",") if p]
    algos = [a for a in args.algos.split(",") if a]
    seeds = [int(s) for s in args.seeds.split(",")]
    for algo in algos:
        if algo not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    params = json.loads(args.params) if args.params else {}
    cells = [(p, a, s) for p in paths for a in algos for s in seeds]
    workers = _worker_count()
    if workers == 1:
        rows = [
            _bench_cell(p, a, s, params.get(a, {}), args.oracle, args.oracle_cap)
            for p, a, s in cells
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(
                    lambda cell: _bench_cell(
                        cell[0], cell[1], cell[2], params.get(cell[1], {}),
                        args.oracle, args.oracle_cap,
                    ),
                    cells,
                )
            )
    rows.sort(key=lambda r: (r["instance"], r["algo"], r["seed"]))
    columns = [
        "instance", "algo", "seed", "benefit", "expense", "feasible",
        "iterations", "elapsed_ns", "visits",
    ]
    if args.oracle:
        columns += ["optimum", "ratio"]
    out = open(args.output, "w", encoding="utf-8", newline="") if args.output else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns])
    finally:
        if args.output:
            out.close()
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mqoselect",
        description="Candidate selection for multi-query optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance file")
    gen.add_argument("--fixture", choices=instances.FIXTURE_NAMES)
    gen.add_argument("--epsilon", type=float, default=None)
    gen.add_argument("--epsilon1", type=float, default=None)
    gen.add_argument("--epsilon2", type=float, default=None)
    gen.add_argument("--budget", type=float, default=None)
    gen.add_argument("--random", action="store_true")
    gen.add_argument("--nodes", type=int, default=12)
    gen.add_argument("--or-prob", type=float, default=0.0)
    gen.add_argument("--fan-in-max", type=int, default=3)
    gen.add_argument("--leaf-prob", type=float, default=0.35)
    gen.add_argument("--size-max", type=int, default=20)
    gen.add_argument("--op-cost-max", type=int, default=20)
    gen.add_argument("--budget-fraction", type=float, default=0.5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--knapsack", nargs="+", metavar="KEY=VALUES")
    gen.add_argument("-o", "--output", required=True)
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="run one algorithm on an instance file")
    solve.add_argument("-i", "--input", required=True)
    solve.add_argument("--algo", choices=ALGORITHMS)
    solve.add_argument(
        "--config", default=None,
        help='JSON configuration object {"algo": name, "seed": int, "params": {...}}',
    )
    solve.add_argument("--budget", type=float, default=None)
    solve.add_argument("--expense-kind", choices=("static", "maintenance", "shared_storage"))
    solve.add_argument("--delta", type=float, default=None)
    solve.add_argument("--rho", type=float, default=None)
    solve.add_argument("--penalty-r", type=float, default=None)
    solve.add_argument("--seed", type=int, default=None)
    solve.add_argument("--params", default=None, help="JSON object of algorithm parameters")
    solve.add_argument("--trace", action="store_true")
    solve.add_argument("-o", "--output", default=None)
    solve.set_defaults(func=cmd_solve)

    bench = sub.add_parser("bench", help="run an algorithm grid, emit CSV")
    bench.add_argument("--instances", required=True, help="comma-separated instance files")
    bench.add_argument("--algos", required=True, help="comma-separated algorithm names")
    bench.add_argument("--seeds", default=None, help="comma-separated seeds (required)")
    bench.add_argument("--params", default=None, help="JSON object: algo -> parameter object")
    bench.add_argument("--oracle", action="store_true", help="add brute-force optimum column")
    bench.add_argument("--oracle-cap", type=int, default=20)
    bench.add_argument("-o", "--output", default=None)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal invariant failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
