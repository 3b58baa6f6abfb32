"""Aggregation and serialization of the evaluation metric suite.

Reports are canonical JSON documents: key-sorted, stable across runs for
identical inputs, with explicit nulls (never zeros) for statistics that had
nothing to measure. Percentiles use the nearest-rank rule so two
implementations of the same run agree byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field


class MetricsError(ValueError):
    """Malformed report document or mismatched report schemas."""


def nearest_rank(values, pct: float) -> float:
    """Nearest-rank percentile (no interpolation) of a non-empty sequence."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("percentile of empty sequence")
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


@dataclass(frozen=True)
class LatencyStats:
    mean: float | None = None
    p50: float | None = None
    p95: float | None = None


@dataclass(frozen=True)
class NodeStats:
    completed_tasks: int = 0
    mean_exec_time_ms: float | None = None
    cpu_pct: float | None = None
    mem_mb: float | None = None


@dataclass(frozen=True)
class MetricsReport:
    scenario: str | None = None
    seed: int | None = None
    warmup_ms: float = 0.0
    measurement_ms: float = 0.0
    inference_latency_ms: LatencyStats = field(default_factory=LatencyStats)
    throughput_rps: float = 0.0
    comm_overhead_ms: float | None = None
    cpu_pct: float | None = None
    mem_mb: float | None = None
    net_bandwidth_mb: float = 0.0
    stability_score: float | None = None
    scheduling_overhead_ms: float | None = None
    load_balance_L: float | None = None
    submitted_tasks: int = 0
    completed_tasks: int = 0
    measured_tasks: int = 0
    rescheduled_tasks: int = 0
    queued_tasks_end: int = 0
    in_flight_tasks_end: int = 0
    starvation_ms: float = 0.0
    per_node: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "scenario": self.scenario,
            "seed": self.seed,
            "warmup_ms": self.warmup_ms,
            "measurement_ms": self.measurement_ms,
            "inference_latency_ms": {
                "mean": self.inference_latency_ms.mean,
                "p50": self.inference_latency_ms.p50,
                "p95": self.inference_latency_ms.p95,
            },
            "throughput_rps": self.throughput_rps,
            "comm_overhead_ms": self.comm_overhead_ms,
            "cpu_pct": self.cpu_pct,
            "mem_mb": self.mem_mb,
            "net_bandwidth_mb": self.net_bandwidth_mb,
            "stability_score": self.stability_score,
            "scheduling_overhead_ms": self.scheduling_overhead_ms,
            "load_balance_L": self.load_balance_L,
            "submitted_tasks": self.submitted_tasks,
            "completed_tasks": self.completed_tasks,
            "measured_tasks": self.measured_tasks,
            "rescheduled_tasks": self.rescheduled_tasks,
            "queued_tasks_end": self.queued_tasks_end,
            "in_flight_tasks_end": self.in_flight_tasks_end,
            "starvation_ms": self.starvation_ms,
            "per_node": {
                node_id: {
                    "completed_tasks": ns.completed_tasks,
                    "mean_exec_time_ms": ns.mean_exec_time_ms,
                    "cpu_pct": ns.cpu_pct,
                    "mem_mb": ns.mem_mb,
                }
                for node_id, ns in self.per_node.items()
            },
        }
        return d


_REQUIRED_KEYS = set(MetricsReport().to_dict())


def aggregate(
    records,
    samples,
    measurement_ms: float,
    *,
    stage_records=None,
    comm_overhead_samples=None,
    scenario: str | None = None,
    seed: int | None = None,
    warmup_ms: float = 0.0,
    stability_score: float | None = None,
    scheduling_overhead_ms: float | None = None,
    load_balance_l: float | None = None,
    transferred_bytes: int = 0,
    submitted_tasks: int | None = None,
    completed_tasks: int | None = None,
    rescheduled_tasks: int = 0,
    queued_tasks_end: int = 0,
    in_flight_tasks_end: int = 0,
    starvation_ms: float = 0.0,
) -> MetricsReport:
    """Build a report from measurement-phase task records and resource samples.

    ``records`` must already exclude the warm-up phase. Latency per record is
    end-to-end (completion minus submission). ``stage_records`` attributes
    work to nodes when tasks span several of them; it defaults to ``records``.
    Empty inputs yield null-valued statistics, never fabricated zeros.
    """
    if measurement_ms <= 0:
        raise MetricsError("measurement_ms must be > 0")
    records = list(records)
    samples = list(samples)
    stage_records = list(stage_records) if stage_records is not None else records

    latencies = [r.end_time - r.submit_time for r in records]
    if latencies:
        latency = LatencyStats(
            mean=sum(latencies) / len(latencies),
            p50=nearest_rank(latencies, 50),
            p95=nearest_rank(latencies, 95),
        )
    else:
        latency = LatencyStats()

    seconds = measurement_ms / 1000.0
    throughput = len(records) / seconds

    comm = None
    if comm_overhead_samples:
        comm_list = list(comm_overhead_samples)
        comm = sum(comm_list) / len(comm_list)

    cpu_mean = None
    mem_mean = None
    if samples:
        cpu_mean = sum(s.cpu_pct for s in samples) / len(samples)
        mem_mean = sum(s.mem_used for s in samples) / len(samples)

    per_node: dict[str, NodeStats] = {}
    by_node: dict[str, list[float]] = {}
    for rec in stage_records:
        by_node.setdefault(rec.node_id, []).append(rec.exec_time)
    samples_by_node: dict[str, list] = {}
    for s in samples:
        samples_by_node.setdefault(s.node_id, []).append(s)
    for node_id in sorted(set(by_node) | set(samples_by_node)):
        times = by_node.get(node_id, [])
        node_samples = samples_by_node.get(node_id, [])
        per_node[node_id] = NodeStats(
            completed_tasks=len(times),
            mean_exec_time_ms=sum(times) / len(times) if times else None,
            cpu_pct=sum(s.cpu_pct for s in node_samples) / len(node_samples)
            if node_samples
            else None,
            mem_mb=sum(s.mem_used for s in node_samples) / len(node_samples)
            if node_samples
            else None,
        )

    return MetricsReport(
        scenario=scenario,
        seed=seed,
        warmup_ms=warmup_ms,
        measurement_ms=measurement_ms,
        inference_latency_ms=latency,
        throughput_rps=throughput,
        comm_overhead_ms=comm,
        cpu_pct=cpu_mean,
        mem_mb=mem_mean,
        net_bandwidth_mb=transferred_bytes / (1024.0 * 1024.0),
        stability_score=stability_score,
        scheduling_overhead_ms=scheduling_overhead_ms,
        load_balance_L=load_balance_l,
        submitted_tasks=submitted_tasks if submitted_tasks is not None else len(records),
        completed_tasks=completed_tasks if completed_tasks is not None else len(records),
        measured_tasks=len(records),
        rescheduled_tasks=rescheduled_tasks,
        queued_tasks_end=queued_tasks_end,
        in_flight_tasks_end=in_flight_tasks_end,
        starvation_ms=starvation_ms,
        per_node=per_node,
    )


def serialize_report(report: MetricsReport) -> str:
    """Canonical, key-sorted document; byte-identical for equal reports."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def parse_report(text: str) -> MetricsReport:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MetricsError(f"invalid report JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise MetricsError("report must be a JSON object")
    missing = sorted(_REQUIRED_KEYS - set(obj))
    extra = sorted(set(obj) - _REQUIRED_KEYS)
    if missing or extra:
        raise MetricsError(
            f"report schema mismatch (missing: {missing or 'none'}, unknown: {extra or 'none'})"
        )
    lat = obj["inference_latency_ms"]
    per_node = {
        node_id: NodeStats(
            completed_tasks=ns["completed_tasks"],
            mean_exec_time_ms=ns["mean_exec_time_ms"],
            cpu_pct=ns["cpu_pct"],
            mem_mb=ns["mem_mb"],
        )
        for node_id, ns in obj["per_node"].items()
    }
    return MetricsReport(
        scenario=obj["scenario"],
        seed=obj["seed"],
        warmup_ms=obj["warmup_ms"],
        measurement_ms=obj["measurement_ms"],
        inference_latency_ms=LatencyStats(mean=lat["mean"], p50=lat["p50"], p95=lat["p95"]),
        throughput_rps=obj["throughput_rps"],
        comm_overhead_ms=obj["comm_overhead_ms"],
        cpu_pct=obj["cpu_pct"],
        mem_mb=obj["mem_mb"],
        net_bandwidth_mb=obj["net_bandwidth_mb"],
        stability_score=obj["stability_score"],
        scheduling_overhead_ms=obj["scheduling_overhead_ms"],
        load_balance_L=obj["load_balance_L"],
        submitted_tasks=obj["submitted_tasks"],
        completed_tasks=obj["completed_tasks"],
        measured_tasks=obj["measured_tasks"],
        rescheduled_tasks=obj["rescheduled_tasks"],
        queued_tasks_end=obj["queued_tasks_end"],
        in_flight_tasks_end=obj["in_flight_tasks_end"],
        starvation_ms=obj["starvation_ms"],
        per_node=per_node,
    )


def load_report(path) -> MetricsReport:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_report(fh.read())


# Flat metric paths compared between two reports, in presentation order.
COMPARED_METRICS = (
    "inference_latency_ms.mean",
    "inference_latency_ms.p50",
    "inference_latency_ms.p95",
    "throughput_rps",
    "comm_overhead_ms",
    "cpu_pct",
    "mem_mb",
    "net_bandwidth_mb",
    "stability_score",
    "scheduling_overhead_ms",
    "load_balance_L",
)


def metric_value(report: MetricsReport, path: str):
    obj = report.to_dict()
    for part in path.split("."):
        obj = obj[part]
    return obj


def compare(new: MetricsReport, old: MetricsReport) -> dict[str, float | None]:
    """Percentage delta per metric: (new - old) / old * 100.

    Latency reductions come out negative and throughput gains positive. A
    zero or missing baseline yields None (printed as NA).
    """
    if not isinstance(new, MetricsReport) or not isinstance(old, MetricsReport):
        raise MetricsError("compare expects two MetricsReport values")
    table: dict[str, float | None] = {}
    for path in COMPARED_METRICS:
        a = metric_value(new, path)
        b = metric_value(old, path)
        if a is None or b is None or b == 0:
            table[path] = None
        else:
            table[path] = (a - b) / b * 100.0
    return table


CSV_HEADER = (
    "scenario",
    "seed",
    "submitted_tasks",
    "completed_tasks",
    "measured_tasks",
    "throughput_rps",
    "latency_mean_ms",
    "latency_p50_ms",
    "latency_p95_ms",
    "comm_overhead_ms",
    "cpu_pct",
    "mem_mb",
    "net_bandwidth_mb",
    "stability_score",
    "scheduling_overhead_ms",
    "load_balance_L",
    "rescheduled_tasks",
    "starvation_ms",
)


def reports_csv(reports) -> str:
    """Flat one-row-per-report export with the fixed CSV_HEADER columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        writer.writerow(
            [
                r.scenario,
                r.seed,
                r.submitted_tasks,
                r.completed_tasks,
                r.measured_tasks,
                r.throughput_rps,
                r.inference_latency_ms.mean,
                r.inference_latency_ms.p50,
                r.inference_latency_ms.p95,
                r.comm_overhead_ms,
                r.cpu_pct,
                r.mem_mb,
                r.net_bandwidth_mb,
                r.stability_score,
                r.scheduling_overhead_ms,
                r.load_balance_L,
                r.rescheduled_tasks,
                r.starvation_ms,
            ]
        )
    return buf.getvalue()
