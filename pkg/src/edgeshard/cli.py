"""Command-line entry point for partitioning, simulation, and report comparison.

Exit codes: 0 on success, 1 on internal errors, 2 on usage or input errors.
Every subcommand is deterministic for fixed inputs and seed; file outputs go
where the user names them while stdout carries human-readable summaries.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cost import cost_profile
from .fixtures import resolve_manifest
from .manifest import ManifestError, serialize_manifest, sub_manifest
from .metrics import MetricsError, compare, load_report, metric_value, reports_csv, serialize_report
from .scheduler import (
    NodeState,
    SchedulerConfigError,
    TaskRequest,
    load_scheduler_config,
    select_node,
)
from .sim import DEFAULT_SEED, ScenarioError, load_scenario, run_scenario
from .partition import greedy_partition, rebalance


def _cmd_partition(args) -> int:
    manifest = resolve_manifest(args.manifest)
    profile = cost_profile(manifest)
    if args.partitions > len(manifest):
        raise ValueError(
            f"cannot split {len(manifest)} layers into {args.partitions} partitions"
        )
    plan = rebalance(greedy_partition(profile, args.partitions), profile, max_iters=args.rebalance_iters)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, (lo, hi) in enumerate(plan.boundaries):
        part = sub_manifest(manifest, lo, hi)
        path = out_dir / f"{manifest.name}.part{i}.jsonl"
        path.write_text(serialize_manifest(part), encoding="utf-8")
        files.append(path.name)
    plan_doc = {
        "model": manifest.name,
        "num_partitions": args.partitions,
        "boundaries": [list(b) for b in plan.boundaries],
        "sizes": list(plan.sizes),
        "per_partition_cost": list(plan.per_partition_cost),
        "balance_L": plan.balance,
        "files": files,
    }
    plan_path = out_dir / f"{manifest.name}.plan.json"
    plan_path.write_text(json.dumps(plan_doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"partition sizes: {list(plan.sizes)}")
    print(f"balance L: {plan.balance}")
    print(f"wrote {len(files)} partition manifests and {plan_path.name} to {out_dir}")
    return 0


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    report = run_scenario(scenario, seed=args.seed)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(serialize_report(report), encoding="utf-8")
    mean = report.inference_latency_ms.mean
    print(f"scenario: {report.scenario} (seed {report.seed})")
    print(f"completed {report.completed_tasks}/{report.submitted_tasks} tasks")
    print(f"throughput: {report.throughput_rps:.3f} req/s")
    print(f"mean inference latency: {'n/a' if mean is None else f'{mean:.2f} ms'}")
    print(f"report written to {out}")
    return 0


def _cmd_report(args) -> int:
    new = load_report(args.report)
    old = load_report(args.baseline)
    table = compare(new, old)
    width = max(len(k) for k in table)
    print(f"{'metric'.ljust(width)}  {'new':>14}  {'baseline':>14}  {'delta%':>10}")
    for key, delta in table.items():
        a = metric_value(new, key)
        b = metric_value(old, key)
        fmt = lambda v: "NA" if v is None else f"{v:.4g}"
        d = "NA" if delta is None else f"{delta:+.2f}"
        print(f"{key.ljust(width)}  {fmt(a):>14}  {fmt(b):>14}  {d:>10}")
    if args.csv:
        Path(args.csv).write_text(reports_csv([new, old]), encoding="utf-8")
        print(f"csv written to {args.csv}")
    return 0


def _cmd_schedule(args) -> int:
    scenario = load_scenario(args.scenario)
    cfg = scenario.scheduler_config
    if args.scheduler_config:
        cfg = load_scheduler_config(args.scheduler_config)
    nodes = [
        NodeState(
            node_id=spec.node_id,
            cpu_avail=spec.profile.cpu,
            mem_avail=spec.profile.memory,
            network_latency=spec.latency_ms,
        )
        for spec in scenario.nodes
    ]
    task = TaskRequest(
        task_id="probe",
        cpu_req=args.cpu if args.cpu is not None else scenario.workload.cpu_req,
        mem_req=args.mem if args.mem is not None else (scenario.workload.mem_req or 1.0),
        priority=args.priority,
    )
    choice = select_node(task, nodes, cfg)
    print(choice if choice is not None else "none")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeshard",
        description="Partition layered models, schedule inference tasks, and "
        "simulate edge clusters deterministically.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="split a manifest into balanced partitions")
    p.add_argument("--manifest", required=True, help="manifest path or builtin:<name>")
    p.add_argument("--partitions", required=True, type=int, help="number of partitions (>= 1)")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--rebalance-iters", type=int, default=100)
    p.set_defaults(func=_cmd_partition)

    s = sub.add_parser("simulate", help="run a scenario and write its metrics report")
    s.add_argument("--scenario", required=True, help="scenario JSON path")
    s.add_argument("--out", required=True, help="report output path")
    s.add_argument("--seed", type=int, default=None, help=f"override scenario seed (scenario default: {DEFAULT_SEED})")
    s.set_defaults(func=_cmd_simulate)

    r = sub.add_parser("report", help="compare two metrics reports")
    r.add_argument("report", help="report file (the new configuration)")
    r.add_argument("baseline", help="baseline report file")
    r.add_argument("--csv", default=None, help="also write both reports as CSV rows")
    r.set_defaults(func=_cmd_report)

    q = sub.add_parser("schedule", help="one-shot node selection against a scenario's fresh cluster")
    q.add_argument("--scenario", required=True)
    q.add_argument("--scheduler-config", default=None)
    q.add_argument("--cpu", type=float, default=None, help="task cpu requirement (core fraction)")
    q.add_argument("--mem", type=float, default=None, help="task memory requirement (MiB)")
    q.add_argument("--priority", type=int, default=0)
    q.set_defaults(func=_cmd_schedule)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    if getattr(args, "partitions", None) is not None and args.partitions < 1:
        print("error: --partitions must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (
        ManifestError,
        ScenarioError,
        MetricsError,
        SchedulerConfigError,
        ValueError,
        KeyError,
        FileNotFoundError,
        IsADirectoryError,
        NotADirectoryError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal invariant breach
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
