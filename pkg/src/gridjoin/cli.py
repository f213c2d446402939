"""Command-line front end: convert data, explain plans, run, and bench.

Subcommands: convert, explain, run, bench, oracle (the last is a debugging
aid).  Exit codes: 0 ok, 1 usage or configuration error, 2 runtime error.
Reported totals exclude loading and result output but include index
construction.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics as pystats
import sys
import time
from dataclasses import replace

import numpy as np

from . import executor, oracle
from .model import (ConfigError, EngineError, OutputMode, load_csv,
                    parse_job, write_binary)
from .optimizer import choose_plan, collect_stats
from .util import physical_core_count

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--threads", type=int, default=None,
                   help="logical task count P (power of two)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker pool size (default: physical cores)")
    p.add_argument("--seed", type=int, default=0, help="master hash seed")
    p.add_argument("--no-rewrite", action="store_true",
                   help="disable hoisted intersections")
    p.add_argument("--order", type=str, default=None,
                   help="explicit variable order, e.g. X,Y,Z")
    p.add_argument("--shares", type=str, default=None,
                   help="explicit shares, e.g. X=16,Y=64 (others get 1)")
    p.add_argument("--instrument", action="store_true",
                   help="collect per-task step counters")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gridjoin",
                 description="Hypercube-partitioned worst-case optimal join")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a CSV relation to binary")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--arity", type=int, required=True)
    p.add_argument("--symmetrize", action="store_true")

    p = sub.add_parser("explain", help="show the chosen plan for a job")
    p.add_argument("job")
    p.add_argument("--json", action="store_true", dest="as_json")
    _add_common(p)

    p = sub.add_parser("run", help="execute a job")
    p.add_argument("job")
    _add_common(p)

    p = sub.add_parser("bench", help="skew and scaling report for a job")
    p.add_argument("job")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--sweep", type=str, default=None,
                   help="comma-separated worker counts for the wall-clock sweep")
    p.add_argument("--tasks-csv", type=str, default=None,
                   help="write per-task task_id,steps,emitted,wall_nanos")
    p.add_argument("--partitions-csv", type=str, default=None,
                   help="write per-atom partition_id,count files with this prefix")
    _add_common(p)

    p = sub.add_parser("oracle", help="brute-force evaluation (debugging)")
    p.add_argument("job")
    _add_common(p)
    return ap


def _apply_overrides(config, args):
    if getattr(args, "threads", None) is not None:
        config = replace(config, threads=args.threads)
    if getattr(args, "workers", None) is not None:
        config = replace(config, workers=args.workers)
    elif os.environ.get("HC_WORKERS"):
        config = replace(config, workers=int(os.environ["HC_WORKERS"]))
    if getattr(args, "seed", None):
        config = replace(config, seed=args.seed)
    if getattr(args, "no_rewrite", False):
        config = replace(config, rewrite=False)
    if getattr(args, "order", None):
        config = replace(config, order=tuple(args.order.split(",")))
    if getattr(args, "shares", None):
        shares = {}
        for item in args.shares.split(","):
            var, _, val = item.partition("=")
            if not val:
                raise ConfigError(f"--shares item {item!r} is not VAR=POW2")
            shares[var.strip()] = int(val)
        config = replace(config, shares=shares)
    if getattr(args, "instrument", False):
        config = replace(config, instrument=True)
    return config


def _plan_for(query, catalog, config):
    stats = collect_stats(catalog)
    plan = choose_plan(query, stats, config.threads,
                       order_override=config.order,
                       shares_override=config.shares,
                       rewrite=config.rewrite)
    return stats, plan


def _workers(config) -> int:
    return config.workers if config.workers is not None else physical_core_count()


def cmd_convert(args) -> int:
    rel = load_csv(args.input, args.arity, symmetrize=args.symmetrize)
    write_binary(rel, args.output)
    print(f"wrote {rel.cardinality} rows (arity {rel.arity}) to {args.output}")
    return EXIT_OK


def _plan_report(query, plan, config) -> dict:
    s = plan.stats
    return {
        "order": list(plan.order),
        "shares": {v: s_ for v, s_ in zip(plan.order, plan.shares.shares)},
        "threads": config.threads,
        "rewrites": [
            {
                "target": h.target_var,
                "sources": [
                    f"{query.atoms[j].relation}.{h.target_var}"
                    for j in h.sources
                ],
                "placement_depth": h.placement,
            }
            for h in plan.rewrites
        ],
        "level_costs": list(plan.cost.level_costs),
        "total_cost": plan.cost.total_unpartitioned,
        "partitioned_cost": plan.cost.total_partitioned,
        "evenness": plan.cost.evenness,
        "orders_tried": s.orders_tried,
        "share_candidates": s.share_candidates,
        "pruned_by_cost": s.pruned_by_cost,
        "pruned_by_domain": s.pruned_by_domain,
        "fell_back": s.fell_back,
    }


def cmd_explain(args) -> int:
    query, catalog, config = parse_job(args.job)
    config = _apply_overrides(config, args)
    _, plan = _plan_for(query, catalog, config)
    report = _plan_report(query, plan, config)
    if args.as_json:
        print(json.dumps(report, indent=2))
        return EXIT_OK
    print(f"order: {' -> '.join(report['order'])}")
    print("shares: " + " x ".join(
        f"{report['shares'][v]}" for v in report["order"])
        + f"  (P={config.threads})")
    if report["rewrites"]:
        for r in report["rewrites"]:
            srcs = " ∩ ".join(r["sources"])
            print(f"hoist tmp_{r['target']} := {srcs} "
                  f"(depth {r['placement_depth']})")
    else:
        print("hoists: none")
    for i, c in enumerate(report["level_costs"], start=1):
        print(f"level {i} ({report['order'][i - 1]}): cost bound {c:.1f}")
    print(f"total cost: {report['total_cost']:.1f}  "
          f"partitioned: {report['partitioned_cost']:.1f}  "
          f"evenness: {report['evenness']:.2f}")
    print(f"{report['share_candidates']} share candidates enumerated, "
          f"{report['pruned_by_cost']} pruned by cost, "
          f"{report['pruned_by_domain']} pruned by domain"
          + (", fell back to unpartitioned order" if report["fell_back"] else ""))
    return EXIT_OK


def _execute(query, catalog, config):
    """Optimize, preprocess, and join; returns (result, plan, timings)."""
    timings = {}
    t0 = time.perf_counter()
    stats, plan = _plan_for(query, catalog, config)
    timings["optimize"] = time.perf_counter() - t0

    workers = _workers(config)
    t0 = time.perf_counter()
    prepared = executor.prepare(query, catalog, plan, workers=workers,
                                seed=config.seed)
    timings["preprocess"] = time.perf_counter() - t0

    mode = "count" if config.output.kind == "count" else "tuples"
    t0 = time.perf_counter()
    result = executor.run(prepared, mode=mode, workers=workers,
                          instrument=config.instrument)
    timings["join"] = time.perf_counter() - t0
    timings["total"] = sum(timings.values())
    return result, plan, timings


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    query, catalog, config = parse_job(args.job)
    config = _apply_overrides(config, args)
    load_s = time.perf_counter() - t0

    result, plan, timings = _execute(query, catalog, config)

    print(f"load: {load_s:.3f}s (excluded from total)")
    for phase in ("optimize", "preprocess", "join"):
        print(f"{phase}: {timings[phase]:.3f}s")
    print(f"total: {timings['total']:.3f}s")
    if config.output.kind == "count":
        print(f"count: {result.count}")
    elif config.output.kind == "tuples":
        for row in result.sorted_tuples():
            print(",".join(str(v) for v in row))
        print(f"count: {result.count}", file=sys.stderr)
    else:
        out = result.sorted_tuples()
        with open(config.output.path, "w") as f:
            for row in out:
                f.write(",".join(str(v) for v in row) + "\n")
        print(f"count: {result.count}  wrote {config.output.path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    query, catalog, config = parse_job(args.job)
    config = _apply_overrides(config, args)
    config = replace(config, instrument=True,
                     output=OutputMode("count"))

    stats, plan = _plan_for(query, catalog, config)
    workers = _workers(config)
    prepared = executor.prepare(query, catalog, plan, workers=workers,
                                seed=config.seed)

    if args.partitions_csv:
        for j, rt in enumerate(prepared.atoms):
            path = f"{args.partitions_csv}.atom{j}.csv"
            with open(path, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["partition_id", "count"])
                sizes = np.diff(rt.partitioned.offsets)
                for pid, cnt in enumerate(sizes):
                    w.writerow([pid, int(cnt)])
            print(f"wrote {path}")

    # Instrumented single-worker pass: the portable work distribution.
    result = executor.run(prepared, mode="count", workers=1, instrument=True)
    steps = sorted((ts.steps for ts in result.task_stats), reverse=True)
    total_steps = sum(steps)
    smax, smin = steps[0], steps[-1]
    print(f"tasks: {len(steps)}  count: {result.count}")
    print(f"cumulative steps: {total_steps}")
    ratio = (smax / smin) if smin else float("inf")
    print(f"skew ratio (max/min steps): {smax}/{smin} = {ratio:.2f}")
    dist = [steps[int(len(steps) * q)] for q in (0.0, 0.25, 0.5, 0.75)]
    print(f"step quartiles (desc): {dist + [steps[-1]]}")

    if args.tasks_csv:
        with open(args.tasks_csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["task_id", "steps", "emitted", "wall_nanos"])
            for ts in result.task_stats:
                w.writerow([ts.task_id, ts.steps, ts.emitted, ts.wall_nanos])
        print(f"wrote {args.tasks_csv}")

    sweep = ([int(w) for w in args.sweep.split(",")] if args.sweep
             else sorted({1, 2, min(4, workers), workers}))
    for w in sweep:
        times = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            executor.run(prepared, mode="count", workers=w)
            times.append(time.perf_counter() - t0)
        print(f"workers {w}: join {pystats.mean(times):.3f}s "
              f"(mean of {args.repeats})")
    return EXIT_OK


def cmd_oracle(args) -> int:
    query, catalog, config = parse_job(args.job)
    config = _apply_overrides(config, args)
    out = oracle.evaluate(query, catalog)
    if config.output.kind == "count":
        print(f"count: {out.shape[0]}")
    else:
        for row in out:
            print(",".join(str(v) for v in row))
        print(f"count: {out.shape[0]}", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "convert": cmd_convert,
    "explain": cmd_explain,
    "run": cmd_run,
    "bench": cmd_bench,
    "oracle": cmd_oracle,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (EngineError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
