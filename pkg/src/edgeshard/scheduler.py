"""Weighted-score node selection with execution history and a placement cache.

Nodes are scored on four axes: resource fit, idleness, historical speed, and
in-flight fairness. A task goes to the eligible node with the strictly
highest weighted score; overloaded, high-latency, and resource-insufficient
nodes are skipped up front. All scheduler mutations are serialized through a
single lock so no reader can observe a half-updated node.
"""
from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field


class SchedulerError(RuntimeError):
    """Inconsistent scheduler state or invalid mutation."""


class SchedulerConfigError(ValueError):
    """Malformed scheduler configuration document."""


@dataclass(frozen=True)
class ScoreWeights:
    """Weights of the four score components; must sum to 1."""

    w_resource: float = 0.2
    w_load: float = 0.2
    w_perf: float = 0.1
    w_balance: float = 0.5

    def __post_init__(self):
        weights = (self.w_resource, self.w_load, self.w_perf, self.w_balance)
        if any(w < 0 for w in weights):
            raise SchedulerConfigError("score weights must be non-negative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise SchedulerConfigError(f"score weights must sum to 1, got {sum(weights)}")


@dataclass(frozen=True)
class SchedulerConfig:
    overload_threshold: float = 0.8
    latency_threshold: float = 100.0
    history_capacity: int = 50
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    cache_enabled: bool = True
    cache_cpu_decimals: int = 2
    cache_mem_decimals: int = 0

    def __post_init__(self):
        if self.overload_threshold <= 0 or self.latency_threshold <= 0:
            raise SchedulerConfigError("thresholds must be > 0")
        if self.history_capacity < 1:
            raise SchedulerConfigError("history_capacity must be >= 1")

    @classmethod
    def from_dict(cls, obj: dict) -> "SchedulerConfig":
        if not isinstance(obj, dict):
            raise SchedulerConfigError("scheduler config must be an object")
        known = {
            "overload_threshold",
            "latency_threshold",
            "history_capacity",
            "weights",
            "cache",
        }
        unknown = sorted(set(obj) - known)
        if unknown:
            raise SchedulerConfigError(f"unknown scheduler config keys: {', '.join(unknown)}")
        kwargs = {}
        for key in ("overload_threshold", "latency_threshold", "history_capacity"):
            if key in obj:
                kwargs[key] = obj[key]
        if "weights" in obj:
            wobj = obj["weights"]
            wkeys = {"w_resource", "w_load", "w_perf", "w_balance"}
            bad = sorted(set(wobj) - wkeys)
            if bad:
                raise SchedulerConfigError(f"unknown weight keys: {', '.join(bad)}")
            kwargs["weights"] = ScoreWeights(**wobj)
        if "cache" in obj:
            cobj = obj["cache"]
            ckeys = {"enabled", "cpu_decimals", "mem_decimals"}
            bad = sorted(set(cobj) - ckeys)
            if bad:
                raise SchedulerConfigError(f"unknown cache keys: {', '.join(bad)}")
            if "enabled" in cobj:
                kwargs["cache_enabled"] = cobj["enabled"]
            if "cpu_decimals" in cobj:
                kwargs["cache_cpu_decimals"] = cobj["cpu_decimals"]
            if "mem_decimals" in cobj:
                kwargs["cache_mem_decimals"] = cobj["mem_decimals"]
        return cls(**kwargs)


def parse_scheduler_config(text: str) -> SchedulerConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchedulerConfigError(f"invalid scheduler config JSON: {exc.msg}") from None
    return SchedulerConfig.from_dict(obj)


def load_scheduler_config(path) -> SchedulerConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scheduler_config(fh.read())


@dataclass
class NodeState:
    """Scheduler-visible runtime state of one node."""

    node_id: str
    cpu_avail: float
    mem_avail: float
    current_load: float = 0.0
    network_latency: float = 0.0
    task_count: int = 0
    exec_history: deque = field(default_factory=lambda: deque(maxlen=50))

    def __post_init__(self):
        if not 0.0 <= self.current_load <= 1.0:
            raise ValueError(f"node {self.node_id}: current_load must be in [0, 1]")
        if self.task_count < 0:
            raise ValueError(f"node {self.node_id}: task_count must be >= 0")


@dataclass
class TaskRequest:
    """An inference request's resource envelope. Priority is carried for
    record-keeping but does not enter the selection score."""

    task_id: str
    cpu_req: float
    mem_req: float
    priority: int = 0

    def __post_init__(self):
        if self.cpu_req < 0 or self.mem_req < 0:
            raise ValueError(f"task {self.task_id}: requirements must be >= 0")
        if self.cpu_req == 0 and self.mem_req == 0:
            raise ValueError(f"task {self.task_id}: at least one requirement must be > 0")


@dataclass
class TaskRecord:
    """Completion record of one executed task (timestamps in ms)."""

    task_id: str
    node_id: str
    submit_time: float
    start_time: float
    end_time: float
    exec_time: float = None
    normalized_perf: float = None

    def __post_init__(self):
        if not self.submit_time <= self.start_time <= self.end_time:
            raise ValueError(f"task {self.task_id}: timestamps out of order")
        if self.exec_time is None:
            self.exec_time = self.end_time - self.start_time


def raw_resource_score(node: NodeState, task: TaskRequest) -> float:
    """Unbounded resource fit: mean of available/required over used dimensions."""
    ratios = []
    if task.cpu_req > 0:
        ratios.append(node.cpu_avail / task.cpu_req)
    if task.mem_req > 0:
        ratios.append(node.mem_avail / task.mem_req)
    if not ratios:
        raise ValueError(f"task {task.task_id}: no usable requirement dimension")
    return sum(ratios) / len(ratios)


def resource_score(node: NodeState, task: TaskRequest) -> float:
    """Resource fit clamped to [0, 1] so no node can dominate on size alone."""
    return min(1.0, max(0.0, raw_resource_score(node, task)))


def load_score(node: NodeState) -> float:
    return 1.0 - node.current_load


def inverse_time_score(avg: float) -> float:
    """Map an average (normalized) execution time to a score in (0, 1]."""
    return 1.0 / (1.0 + avg)


def normalized_history(history) -> list[float]:
    """Min-max normalize an execution-time window into [0, 1].

    A degenerate window (single entry, or all entries equal) normalizes to
    zeros, which keeps the performance score optimistic.
    """
    values = list(history)
    if not values:
        return []
    lo = min(values)
    hi = max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def performance_score(node: NodeState) -> float:
    """Historical speed score; an empty history scores 1.0 so new nodes are
    schedulable."""
    normed = normalized_history(node.exec_history)
    if not normed:
        return 1.0
    return inverse_time_score(sum(normed) / len(normed))


def balance_score(node: NodeState) -> float:
    return 1.0 / (1.0 + node.task_count * 2)


def total_score(node: NodeState, task: TaskRequest, weights: ScoreWeights) -> float:
    return (
        weights.w_resource * resource_score(node, task)
        + weights.w_load * load_score(node)
        + weights.w_perf * performance_score(node)
        + weights.w_balance * balance_score(node)
    )


def has_sufficient_resources(node: NodeState, task: TaskRequest) -> bool:
    return node.cpu_avail >= task.cpu_req and node.mem_avail >= task.mem_req


def is_eligible(node: NodeState, task: TaskRequest, cfg: SchedulerConfig) -> bool:
    """The three skip checks applied before any scoring."""
    if node.current_load > cfg.overload_threshold:
        return False
    if node.network_latency > cfg.latency_threshold:
        return False
    return has_sufficient_resources(node, task)


def select_node(task: TaskRequest, nodes, cfg: SchedulerConfig | None = None) -> str | None:
    """Scan nodes in the given order and pick the strictly best total score.

    Ties keep the earlier node; a node scoring exactly 0 is never picked.
    Returns None when no eligible node exists.
    """
    cfg = cfg or SchedulerConfig()
    best_score = 0.0
    selected = None
    for node in nodes:
        if not is_eligible(node, task, cfg):
            continue
        score = total_score(node, task, cfg.weights)
        if score > best_score:
            best_score = score
            selected = node.node_id
    return selected


class PerformanceCache:
    """Maps recurring requirement patterns to the node that last served them
    quickly (execution time at or below the pattern's median)."""

    def __init__(self, cpu_decimals: int = 2, mem_decimals: int = 0):
        self.cpu_decimals = cpu_decimals
        self.mem_decimals = mem_decimals
        self._entries: dict[tuple, list[tuple[str, float]]] = {}
        self.hits = 0
        self.misses = 0

    def key(self, task: TaskRequest) -> tuple:
        return (
            round(task.cpu_req, self.cpu_decimals),
            round(task.mem_req, self.mem_decimals),
            task.priority,
        )

    def record(self, task: TaskRequest, node_id: str, exec_time: float) -> None:
        self._entries.setdefault(self.key(task), []).append((node_id, exec_time))

    def lookup(self, task: TaskRequest) -> str | None:
        entries = self._entries.get(self.key(task))
        if not entries:
            self.misses += 1
            return None
        times = sorted(t for _, t in entries)
        median = times[(len(times) - 1) // 2]
        for node_id, exec_time in reversed(entries):
            if exec_time <= median:
                self.hits += 1
                return node_id
        self.misses += 1
        return None


def cache_lookup(task: TaskRequest, cache: PerformanceCache) -> str | None:
    return cache.lookup(task)


class Scheduler:
    """Single-writer scheduling authority over a registry of nodes.

    Tracks in-flight assignments, bounded execution histories, the placement
    cache, and instrumentation (score evaluations, selection wall time).
    """

    def __init__(self, config: SchedulerConfig | None = None):
        self.config = config or SchedulerConfig()
        self.nodes: dict[str, NodeState] = {}
        self.cache = PerformanceCache(
            cpu_decimals=self.config.cache_cpu_decimals,
            mem_decimals=self.config.cache_mem_decimals,
        )
        self.completed_records: list[TaskRecord] = []
        self.score_evaluations = 0
        self._inflight: dict[str, tuple[TaskRequest, str]] = {}
        self._select_wall_total = 0.0
        self._select_calls = 0
        self._lock = threading.Lock()

    def add_node(self, state: NodeState) -> None:
        with self._lock:
            if state.node_id in self.nodes:
                raise SchedulerError(f"duplicate node id {state.node_id!r}")
            state.exec_history = deque(state.exec_history, maxlen=self.config.history_capacity)
            self.nodes[state.node_id] = state

    def remove_node(self, node_id: str) -> NodeState:
        with self._lock:
            try:
                return self.nodes.pop(node_id)
            except KeyError:
                raise SchedulerError(f"unknown node {node_id!r}") from None

    def select(self, task: TaskRequest) -> str | None:
        """Cache-aware Node Selection: a cached placement is used only when the
        hinted node still passes every skip check; otherwise a full scan runs."""
        with self._lock:
            t0 = time.perf_counter()
            try:
                if self.config.cache_enabled:
                    hint = self.cache.lookup(task)
                    if hint is not None:
                        node = self.nodes.get(hint)
                        if node is not None and is_eligible(node, task, self.config):
                            return hint
                best_score = 0.0
                selected = None
                for node in self.nodes.values():
                    if not is_eligible(node, task, self.config):
                        continue
                    score = total_score(node, task, self.config.weights)
                    self.score_evaluations += 1
                    if score > best_score:
                        best_score = score
                        selected = node.node_id
                return selected
            finally:
                self._select_wall_total += time.perf_counter() - t0
                self._select_calls += 1

    def assign(self, task: TaskRequest, node_id: str) -> None:
        with self._lock:
            node = self.nodes.get(node_id)
            if node is None:
                raise SchedulerError(f"unknown node {node_id!r}")
            if task.task_id in self._inflight:
                raise SchedulerError(f"task {task.task_id!r} already in flight")
            if not has_sufficient_resources(node, task):
                raise SchedulerError(f"node {node_id!r} cannot fit task {task.task_id!r}")
            node.cpu_avail -= task.cpu_req
            node.mem_avail -= task.mem_req
            node.task_count += 1
            self._inflight[task.task_id] = (task, node_id)

    def complete(self, record: TaskRecord) -> TaskRecord:
        """Fold a completion back into the registry.

        Decrements the in-flight count, releases reservations, appends to the
        bounded history, min-max normalizes the record against the updated
        window, and feeds the cache. Load recalibration is owned by the
        environment driving this scheduler (the simulator's busy-window model).
        """
        with self._lock:
            node = self.nodes.get(record.node_id)
            if node is None:
                raise SchedulerError(f"unknown node {record.node_id!r}")
            if node.task_count < 1:
                raise SchedulerError(f"node {record.node_id!r}: task_count underflow")
            entry = self._inflight.pop(record.task_id, None)
            if entry is None:
                raise SchedulerError(f"task {record.task_id!r} is not in flight")
            task, assigned_node = entry
            if assigned_node != record.node_id:
                raise SchedulerError(
                    f"task {record.task_id!r} completed on {record.node_id!r}, "
                    f"assigned to {assigned_node!r}"
                )
            node.task_count -= 1
            node.cpu_avail += task.cpu_req
            node.mem_avail += task.mem_req
            node.exec_history.append(record.exec_time)
            window = list(node.exec_history)
            lo, hi = min(window), max(window)
            record.normalized_perf = 0.0 if hi == lo else (record.exec_time - lo) / (hi - lo)
            self.cache.record(task, record.node_id, record.exec_time)
            self.completed_records.append(record)
            return record

    def cancel(self, task_id: str) -> TaskRequest:
        """Release an in-flight assignment without recording a completion.
        Used when a node leaves with work still on it."""
        with self._lock:
            entry = self._inflight.pop(task_id, None)
            if entry is None:
                raise SchedulerError(f"task {task_id!r} is not in flight")
            task, node_id = entry
            node = self.nodes.get(node_id)
            if node is not None:
                node.task_count -= 1
                node.cpu_avail += task.cpu_req
                node.mem_avail += task.mem_req
            return task

    def metrics(self) -> dict:
        """Per-node summary plus scheduling instrumentation."""
        with self._lock:
            per_node = {}
            by_node: dict[str, list[float]] = {}
            for rec in self.completed_records:
                by_node.setdefault(rec.node_id, []).append(rec.exec_time)
            for node_id, node in self.nodes.items():
                times = by_node.get(node_id, [])
                per_node[node_id] = {
                    "completed": len(times),
                    "mean_exec_time_ms": sum(times) / len(times) if times else None,
                    "task_count": node.task_count,
                    "current_load": node.current_load,
                }
            mean_wall = (
                self._select_wall_total / self._select_calls * 1000.0
                if self._select_calls
                else None
            )
            return {
                "per_node": per_node,
                "select_calls": self._select_calls,
                "select_mean_wall_ms": mean_wall,
                "score_evaluations": self.score_evaluations,
                "cache_hits": self.cache.hits,
                "cache_misses": self.cache.misses,
            }
