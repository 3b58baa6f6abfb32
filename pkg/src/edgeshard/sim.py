"""Deterministic discrete-event simulation of an edge inference cluster.

Each inference request is decomposed into one subtask per model partition;
subtasks are placed by the weighted-score scheduler and executed serially on
their node, with transfer delays charged when consecutive partitions land on
different nodes. Node load is the busy-time fraction of the trailing one
second window. Everything observable is a pure function of (scenario, seed):
events are totally ordered by (time, kind priority, insertion sequence) and
all randomness flows from one seeded generator.
"""
from __future__ import annotations

import heapq
import itertools
import json
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .cost import cost_profile
from .fixtures import resolve_manifest
from .manifest import ModelManifest, sub_manifest
from .metrics import MetricsReport, aggregate
from .partition import (
    CapabilityWeights,
    NodeCapability,
    PartitionPlan,
    capability_score,
    cluster_norm,
    greedy_partition,
    plan_for_nodes,
    rebalance,
)
from .scheduler import (
    NodeState,
    Scheduler,
    SchedulerConfig,
    TaskRecord,
    TaskRequest,
    load_scheduler_config,
)

DEFAULT_SEED = 42

# Calibrated so the bundled 141-layer fixture lands near 233 ms on the High
# profile, which keeps the profile ordering at a familiar scale.
DEFAULT_BASE_MS_PER_COST_UNIT = 5.3e-6

# A 224x224x3 float32 input tensor.
DEFAULT_TRANSFER_BYTES = 602112

_LOAD_WINDOW_MS = 1000.0
_SAMPLE_WINDOW_MS = 100.0
_SAMPLE_PERIOD_MS = 1000.0


class ScenarioError(ValueError):
    """Invalid scenario document."""


@dataclass(frozen=True)
class NodeProfile:
    """Static node capacity: CPU core-fraction and memory in MiB."""

    name: str
    cpu: float
    memory: float

    def __post_init__(self):
        if self.cpu <= 0:
            raise ScenarioError(f"profile {self.name!r}: cpu must be > 0")
        if self.memory < 0:
            raise ScenarioError(f"profile {self.name!r}: memory must be >= 0")


PROFILES = {
    "high": NodeProfile("high", 1.0, 1024.0),
    "medium": NodeProfile("medium", 0.6, 512.0),
    "low": NodeProfile("low", 0.4, 512.0),
}


@dataclass(frozen=True)
class ExecModel:
    """Execution-time model: ms per cost unit at one full core, a memory
    pressure multiplier, and bounded uniform jitter."""

    base_ms_per_cost_unit: float = DEFAULT_BASE_MS_PER_COST_UNIT
    memory_pressure_factor: float = 2.0
    jitter_pct: float = 5.0

    def __post_init__(self):
        if self.base_ms_per_cost_unit <= 0:
            raise ScenarioError("base_ms_per_cost_unit must be > 0")
        if self.memory_pressure_factor < 1:
            raise ScenarioError("memory_pressure_factor must be >= 1")
        if not 0 <= self.jitter_pct <= 50:
            raise ScenarioError("jitter_pct must be in [0, 50]")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExecModel":
        known = {"base_ms_per_cost_unit", "memory_pressure_factor", "jitter_pct"}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ScenarioError(f"unknown exec_model keys: {', '.join(unknown)}")
        return cls(**obj)


def exec_time(
    partition_cost: float,
    node: NodeProfile,
    model: ExecModel,
    rng: random.Random,
    working_set_mib: float = 0.0,
) -> float:
    """Simulated execution time in ms; strictly decreasing in node CPU.

    The memory pressure multiplier applies when the partition working set
    exceeds the node's memory. The jitter draw always consumes exactly one
    value from ``rng`` so the random stream stays aligned across configs.
    """
    if node.cpu <= 0:
        raise ValueError("node cpu must be > 0")
    jitter = rng.uniform(-model.jitter_pct, model.jitter_pct) / 100.0
    factor = model.memory_pressure_factor if working_set_mib > node.memory else 1.0
    return partition_cost * model.base_ms_per_cost_unit / node.cpu * factor * (1.0 + jitter)


class EventKind(Enum):
    TASK_ARRIVAL = "task_arrival"
    TASK_COMPLETE = "task_complete"
    NODE_JOIN = "node_join"
    NODE_LEAVE = "node_leave"
    MONITOR_SAMPLE = "monitor_sample"


# Tie-break at equal timestamps: completions before arrivals before
# membership before monitor samples. Queue retries sit between completions
# and arrivals so freed capacity drains the backlog before new work lands.
_PRIO_COMPLETE = 0
_PRIO_RETRY = 1
_PRIO_ARRIVAL = 2
_PRIO_MEMBERSHIP = 3
_PRIO_MONITOR = 4


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: EventKind
    payload: dict


@dataclass(frozen=True)
class ResourceSample:
    time: float
    node_id: str
    cpu_pct: float
    mem_used: float
    mem_pct: float
    net_rx: int
    net_tx: int


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    profile: NodeProfile
    latency_ms: float = 5.0
    latency_jitter_ms: float = 0.0

    def __post_init__(self):
        if self.latency_ms < 0 or self.latency_jitter_ms < 0:
            raise ScenarioError(f"node {self.node_id!r}: latency values must be >= 0")


@dataclass(frozen=True)
class MembershipChange:
    time_ms: float
    action: str  # "join" | "leave"
    node_id: str
    spec: NodeSpec | None = None


@dataclass(frozen=True)
class Workload:
    arrival: str  # "fixed-rate" | "closed-loop"
    rate_rps: float | None = None
    concurrency: int = 1
    think_time_ms: float = 0.0
    request_count: int | None = None
    batch_size: int = 1
    cpu_req: float = 0.05
    mem_req: float | None = None
    priority: int = 0

    def __post_init__(self):
        if self.arrival not in ("fixed-rate", "closed-loop"):
            raise ScenarioError(f"unknown arrival process {self.arrival!r}")
        if self.arrival == "fixed-rate" and (self.rate_rps is None or self.rate_rps <= 0):
            raise ScenarioError("fixed-rate workload requires rate_rps > 0")
        if self.concurrency < 1:
            raise ScenarioError("concurrency must be >= 1")
        if self.think_time_ms < 0:
            raise ScenarioError("think_time_ms must be >= 0")
        if self.request_count is not None and self.request_count < 1:
            raise ScenarioError("request_count must be >= 1 or null")
        if self.batch_size < 1:
            raise ScenarioError("batch_size must be >= 1")
        if self.cpu_req <= 0:
            raise ScenarioError("cpu_req must be > 0")
        if self.mem_req is not None and self.mem_req <= 0:
            raise ScenarioError("mem_req must be > 0 or null")


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    manifest: ModelManifest
    nodes: tuple[NodeSpec, ...]
    workload: Workload
    membership: tuple[MembershipChange, ...] = ()
    warmup_ms: float = 30000.0
    measurement_ms: float = 300000.0
    num_partitions: int | None = None
    transfer_bytes: int = DEFAULT_TRANSFER_BYTES
    retry_interval_ms: float = 50.0
    queue_timeout_ms: float = 10000.0
    scheduling_cost_ms: float = 0.0
    exec_model: ExecModel = field(default_factory=ExecModel)
    scheduler_config: SchedulerConfig = field(default_factory=SchedulerConfig)


def _parse_node(obj: dict, seen: set) -> NodeSpec:
    known = {"node_id", "profile", "cpu", "memory", "latency_ms", "latency_jitter_ms"}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ScenarioError(f"unknown node keys: {', '.join(unknown)}")
    node_id = obj.get("node_id")
    if not isinstance(node_id, str) or not node_id:
        raise ScenarioError("every node needs a non-empty node_id")
    if node_id in seen:
        raise ScenarioError(f"duplicate node_id {node_id!r}")
    seen.add(node_id)
    if "profile" in obj:
        if "cpu" in obj or "memory" in obj:
            raise ScenarioError(f"node {node_id!r}: give either profile or cpu/memory, not both")
        name = obj["profile"]
        if name not in PROFILES:
            raise ScenarioError(f"node {node_id!r}: unknown profile {name!r}")
        profile = PROFILES[name]
    else:
        if "cpu" not in obj or "memory" not in obj:
            raise ScenarioError(f"node {node_id!r}: custom nodes need cpu and memory")
        profile = NodeProfile(f"custom:{node_id}", float(obj["cpu"]), float(obj["memory"]))
    return NodeSpec(
        node_id=node_id,
        profile=profile,
        latency_ms=float(obj.get("latency_ms", 5.0)),
        latency_jitter_ms=float(obj.get("latency_jitter_ms", 0.0)),
    )


def parse_scenario(obj: dict, base_dir=None) -> Scenario:
    """Validate a scenario object into a :class:`Scenario`.

    ``base_dir`` anchors relative manifest and scheduler-config paths.
    """
    if not isinstance(obj, dict):
        raise ScenarioError("scenario must be a JSON object")
    known = {
        "name",
        "seed",
        "manifest",
        "nodes",
        "workload",
        "membership",
        "warmup_ms",
        "measurement_ms",
        "num_partitions",
        "transfer_bytes",
        "retry_interval_ms",
        "queue_timeout_ms",
        "scheduling_cost_ms",
        "exec_model",
        "scheduler",
    }
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {', '.join(unknown)}")

    manifest = resolve_manifest(obj.get("manifest", "builtin:mobilenet_v2"), base_dir)

    raw_nodes = obj.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise ScenarioError("scenario needs a non-empty node list")
    seen: set = set()
    nodes = tuple(_parse_node(n, seen) for n in raw_nodes)

    if "workload" not in obj or not isinstance(obj["workload"], dict):
        raise ScenarioError("scenario needs a workload object")
    wknown = {
        "arrival",
        "rate_rps",
        "concurrency",
        "think_time_ms",
        "request_count",
        "batch_size",
        "cpu_req",
        "mem_req",
        "priority",
    }
    wunknown = sorted(set(obj["workload"]) - wknown)
    if wunknown:
        raise ScenarioError(f"unknown workload keys: {', '.join(wunknown)}")
    if "arrival" not in obj["workload"]:
        raise ScenarioError("workload needs an arrival process")
    workload = Workload(**obj["workload"])

    membership = []
    for entry in obj.get("membership", []):
        eknown = {"time_ms", "join", "leave"}
        eunknown = sorted(set(entry) - eknown)
        if eunknown:
            raise ScenarioError(f"unknown membership keys: {', '.join(eunknown)}")
        if "time_ms" not in entry or entry["time_ms"] < 0:
            raise ScenarioError("membership entries need time_ms >= 0")
        if ("join" in entry) == ("leave" in entry):
            raise ScenarioError("membership entries need exactly one of join/leave")
        if "leave" in entry:
            membership.append(
                MembershipChange(time_ms=float(entry["time_ms"]), action="leave", node_id=entry["leave"])
            )
        else:
            spec = _parse_node(entry["join"], seen)
            membership.append(
                MembershipChange(
                    time_ms=float(entry["time_ms"]), action="join", node_id=spec.node_id, spec=spec
                )
            )

    warmup_ms = float(obj.get("warmup_ms", 30000.0))
    measurement_ms = float(obj.get("measurement_ms", 300000.0))
    if warmup_ms < 0 or measurement_ms <= 0:
        raise ScenarioError("warmup_ms must be >= 0 and measurement_ms > 0")

    num_partitions = obj.get("num_partitions")
    if num_partitions is not None:
        num_partitions = int(num_partitions)
        if not 1 <= num_partitions <= len(manifest):
            raise ScenarioError(f"num_partitions must be in [1, {len(manifest)}]")
    elif len(nodes) > len(manifest):
        raise ScenarioError("more nodes than layers; set num_partitions explicitly")

    sched_ref = obj.get("scheduler")
    if sched_ref is None:
        scheduler_config = SchedulerConfig()
    elif isinstance(sched_ref, str):
        path = Path(sched_ref)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        scheduler_config = load_scheduler_config(path)
    elif isinstance(sched_ref, dict):
        scheduler_config = SchedulerConfig.from_dict(sched_ref)
    else:
        raise ScenarioError("scheduler must be a path or an object")

    retry_interval_ms = float(obj.get("retry_interval_ms", 50.0))
    queue_timeout_ms = float(obj.get("queue_timeout_ms", 10000.0))
    scheduling_cost_ms = float(obj.get("scheduling_cost_ms", 0.0))
    transfer_bytes = int(obj.get("transfer_bytes", DEFAULT_TRANSFER_BYTES))
    if retry_interval_ms <= 0 or queue_timeout_ms <= 0:
        raise ScenarioError("retry_interval_ms and queue_timeout_ms must be > 0")
    if scheduling_cost_ms < 0 or transfer_bytes < 0:
        raise ScenarioError("scheduling_cost_ms and transfer_bytes must be >= 0")

    return Scenario(
        name=str(obj.get("name", "scenario")),
        seed=int(obj.get("seed", DEFAULT_SEED)),
        manifest=manifest,
        nodes=nodes,
        workload=workload,
        membership=tuple(membership),
        warmup_ms=warmup_ms,
        measurement_ms=measurement_ms,
        num_partitions=num_partitions,
        transfer_bytes=transfer_bytes,
        retry_interval_ms=retry_interval_ms,
        queue_timeout_ms=queue_timeout_ms,
        scheduling_cost_ms=scheduling_cost_ms,
        exec_model=ExecModel.from_dict(obj.get("exec_model", {})),
        scheduler_config=scheduler_config,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        obj = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid scenario JSON: {exc.msg}") from None
    return parse_scenario(obj, base_dir=path.parent)


class _Request:
    """One inference request flowing through the partition stages."""

    __slots__ = (
        "rid",
        "submit_time",
        "stage_idx",
        "attempts",
        "rescheduled",
        "max_queue_wait",
        "pending_since",
        "last_node",
        "first_start",
        "completion_time",
    )

    def __init__(self, rid: str, submit_time: float):
        self.rid = rid
        self.submit_time = submit_time
        self.stage_idx = 0
        self.attempts = 0
        self.rescheduled = 0
        self.max_queue_wait = 0.0
        self.pending_since: float | None = None
        self.last_node: str | None = None
        self.first_start: float | None = None
        self.completion_time: float | None = None


@dataclass
class _StageJob:
    request: _Request
    stage: int
    task: TaskRequest
    node_id: str
    transfer_ms: float
    dispatched_at: float
    exec_started: float | None = None
    cancelled: bool = False


class _SimNode:
    """Simulator-side node runtime wrapping the scheduler-visible state."""

    def __init__(self, spec: NodeSpec):
        self.spec = spec
        self.state = NodeState(
            node_id=spec.node_id,
            cpu_avail=spec.profile.cpu,
            mem_avail=spec.profile.memory,
            network_latency=spec.latency_ms,
        )
        self.online = True
        self.queue: deque[_StageJob] = deque()
        self.current: _StageJob | None = None
        self.busy: deque[list] = deque()  # [start, end] execution spans
        self.rx_bytes = 0
        self.tx_bytes = 0

    def busy_in(self, t0: float, t1: float) -> float:
        while self.busy and self.busy[0][1] < t1 - _LOAD_WINDOW_MS - _SAMPLE_WINDOW_MS:
            self.busy.popleft()
        total = 0.0
        for start, end in self.busy:
            total += max(0.0, min(end, t1) - max(start, t0))
        return total

    def load_at(self, t: float) -> float:
        return min(1.0, self.busy_in(t - _LOAD_WINDOW_MS, t) / _LOAD_WINDOW_MS)


class Simulation:
    """Event-driven execution of one scenario. Single-threaded; independent
    scenarios may run concurrently with no shared state."""

    def __init__(self, scenario: Scenario, seed: int | None = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.rng = random.Random(self.seed)
        self.now = 0.0
        self.horizon = scenario.warmup_ms + scenario.measurement_ms

        self._heap: list = []
        self._seq = itertools.count()
        self.trace: list[SimEvent] = []

        self.sched = Scheduler(scenario.scheduler_config)
        self.nodes: dict[str, _SimNode] = {}
        for spec in scenario.nodes:
            node = _SimNode(spec)
            self.nodes[spec.node_id] = node
            self.sched.add_node(node.state)

        self.plan = self._build_plan()
        profile = cost_profile(scenario.manifest)
        self.stage_costs = list(self.plan.per_partition_cost)
        self.stage_ws = [
            self._working_set_mib(lo, hi) for lo, hi in self.plan.boundaries
        ]
        self.num_stages = len(self.stage_costs)
        self.total_cost = profile.total

        self._pending: deque[_Request] = deque()
        self._retry_scheduled = False
        self._starved_since: float | None = None
        self.starvation_ms = 0.0

        self.submitted = 0
        self.completed = 0
        self._in_flight = 0
        self._issued = 0
        self.rescheduled_total = 0

        self.samples: list[ResourceSample] = []
        self.stage_records: list[TaskRecord] = []
        self.finished_requests: list[_Request] = []
        self.comm_events: list[tuple[float, float]] = []  # (time, transfer ms)
        self.transfer_events: list[tuple[float, int]] = []  # (time, bytes)
        self.capability_scores: dict[str, float] = {}
        self._recompute_capabilities()

    # -- setup ---------------------------------------------------------

    def _build_plan(self) -> PartitionPlan:
        profile = cost_profile(self.scenario.manifest)
        if self.scenario.num_partitions is not None:
            plan = greedy_partition(profile, self.scenario.num_partitions)
        else:
            caps = [
                NodeCapability(s.node_id, s.profile.cpu, s.profile.memory)
                for s in self.scenario.nodes
            ]
            plan = plan_for_nodes(profile, caps, CapabilityWeights())
        return rebalance(plan, profile)

    def _working_set_mib(self, lo: int, hi: int) -> float:
        part = sub_manifest(self.scenario.manifest, lo, hi)
        params = sum(layer.param_count for layer in part.layers)
        return max(1.0, params * 4 / (1024.0 * 1024.0))

    def _recompute_capabilities(self) -> None:
        caps = [
            NodeCapability(n.spec.node_id, n.spec.profile.cpu, n.spec.profile.memory)
            for n in self.nodes.values()
            if n.online
        ]
        if not caps:
            self.capability_scores = {}
            return
        norm = cluster_norm(caps)
        weights = CapabilityWeights()
        self.capability_scores = {
            c.node_id: capability_score(c, weights, norm) for c in caps
        }

    # -- event plumbing --------------------------------------------------

    def _push(self, time_ms: float, prio: int, tag: str, payload) -> None:
        heapq.heappush(self._heap, (time_ms, prio, next(self._seq), tag, payload))

    def _trace(self, kind: EventKind, payload: dict) -> None:
        self.trace.append(SimEvent(time=self.now, kind=kind, payload=payload))

    def _schedule_monitor(self, node_id: str, from_ms: float) -> None:
        tick = (int(from_ms // _SAMPLE_PERIOD_MS) + 1) * _SAMPLE_PERIOD_MS
        while tick <= self.horizon:
            self._push(tick, _PRIO_MONITOR, "monitor", node_id)
            tick += _SAMPLE_PERIOD_MS

    def _schedule_arrivals(self) -> None:
        w = self.scenario.workload
        if w.arrival == "fixed-rate":
            period = 1000.0 / w.rate_rps
            t = 0.0
            while (w.request_count is None and t < self.horizon) or (
                w.request_count is not None and self._issued < w.request_count
            ):
                self._push(t, _PRIO_ARRIVAL, "arrival", None)
                self._issued += 1
                t += period
        else:
            budget = w.request_count if w.request_count is not None else w.concurrency
            for _ in range(min(w.concurrency, budget)):
                self._push(0.0, _PRIO_ARRIVAL, "arrival", None)
                self._issued += 1

    def _maybe_issue_closed_loop(self, t: float) -> None:
        w = self.scenario.workload
        if w.arrival != "closed-loop":
            return
        next_t = t + w.think_time_ms
        if next_t >= self.horizon:
            return
        if w.request_count is not None and self._issued >= w.request_count:
            return
        self._push(next_t, _PRIO_ARRIVAL, "arrival", None)
        self._issued += 1

    # -- dispatch and execution -----------------------------------------

    def _latency_draw(self, node: _SimNode) -> float:
        return node.spec.latency_ms + self.rng.uniform(0.0, node.spec.latency_jitter_ms)

    def _refresh_loads(self, t: float) -> None:
        for node in self.nodes.values():
            if node.online:
                node.state.current_load = node.load_at(t)

    def _stage_task(self, req: _Request) -> TaskRequest:
        w = self.scenario.workload
        stage = req.stage_idx
        mem_req = w.mem_req if w.mem_req is not None else self.stage_ws[stage]
        return TaskRequest(
            task_id=f"{req.rid}:{stage}:{req.attempts}",
            cpu_req=w.cpu_req,
            mem_req=mem_req,
            priority=w.priority,
        )

    def _try_place(self, req: _Request, t: float) -> bool:
        self._refresh_loads(t)
        task = self._stage_task(req)
        node_id = self.sched.select(task)
        if node_id is None:
            return False
        self.sched.assign(task, node_id)
        node = self.nodes[node_id]
        transfer = self.scenario.scheduling_cost_ms
        if req.last_node is None:
            # Ingress hop: the request reaches the cluster.
            transfer += self._latency_draw(node)
            node.rx_bytes += self.scenario.transfer_bytes
        elif req.last_node != node_id:
            # Inter-partition hop between different nodes.
            hop = self._latency_draw(node)
            transfer += hop
            prev = self.nodes.get(req.last_node)
            if prev is not None:
                prev.tx_bytes += self.scenario.transfer_bytes
            node.rx_bytes += self.scenario.transfer_bytes
            self.comm_events.append((t, hop))
            self.transfer_events.append((t, self.scenario.transfer_bytes))
        if req.pending_since is not None:
            req.max_queue_wait = max(req.max_queue_wait, t - req.pending_since)
            req.pending_since = None
        job = _StageJob(
            request=req,
            stage=req.stage_idx,
            task=task,
            node_id=node_id,
            transfer_ms=transfer,
            dispatched_at=t,
        )
        node.queue.append(job)
        self._try_start(node, t)
        return True

    def _dispatch(self, req: _Request, t: float, was_in_flight: bool) -> None:
        """Place the request's current stage, or queue it.

        Continuation stages (and leave-driven redispatches) bypass the FIFO
        and, when unplaceable, wait at its head: a request mid-pipeline moves
        forward before fresh arrivals claim capacity.
        """
        req.attempts += 1
        placed = False
        if was_in_flight or not self._pending:
            placed = self._try_place(req, t)
        if placed:
            if not was_in_flight:
                self._in_flight += 1
            return
        if was_in_flight:
            self._in_flight -= 1
        req.pending_since = t
        if was_in_flight:
            self._pending.appendleft(req)
        else:
            self._pending.append(req)
        self._ensure_retry(t)

    def _try_start(self, node: _SimNode, t: float) -> None:
        if not node.online or node.current is not None or not node.queue:
            return
        job = node.queue.popleft()
        job.exec_started = t
        duration = job.transfer_ms + exec_time(
            self.stage_costs[job.stage] * self.scenario.workload.batch_size,
            node.spec.profile,
            self.scenario.exec_model,
            self.rng,
            working_set_mib=self.stage_ws[job.stage],
        )
        node.current = job
        node.busy.append([t, t + duration])
        self._push(t + duration, _PRIO_COMPLETE, "complete", job)

    def _drain_pending(self, t: float) -> None:
        while self._pending:
            req = self._pending[0]
            if not self._try_place(req, t):
                break
            self._pending.popleft()
            self._in_flight += 1
        if self._pending:
            self._ensure_retry(t)

    def _ensure_retry(self, t: float) -> None:
        if not self._retry_scheduled:
            self._retry_scheduled = True
            self._push(t + self.scenario.retry_interval_ms, _PRIO_RETRY, "retry", None)

    # -- event handlers ---------------------------------------------------

    def _on_arrival(self, t: float) -> None:
        req = _Request(rid=f"r{self.submitted:05d}", submit_time=t)
        self.submitted += 1
        self._trace(EventKind.TASK_ARRIVAL, {"request": req.rid})
        self._dispatch(req, t, was_in_flight=False)

    def _on_complete(self, job: _StageJob, t: float) -> None:
        if job.cancelled:
            return
        node = self.nodes[job.node_id]
        node.current = None
        record = TaskRecord(
            task_id=job.task.task_id,
            node_id=job.node_id,
            submit_time=job.dispatched_at,
            start_time=job.exec_started,
            end_time=t,
        )
        self.sched.complete(record)
        self.stage_records.append(record)
        req = job.request
        req.last_node = job.node_id
        if req.first_start is None:
            req.first_start = job.exec_started
        self._trace(
            EventKind.TASK_COMPLETE,
            {"request": req.rid, "stage": job.stage, "node": job.node_id},
        )
        if job.stage + 1 < self.num_stages:
            req.stage_idx += 1
            self._dispatch(req, t, was_in_flight=True)
        else:
            req.completion_time = t
            self.completed += 1
            self._in_flight -= 1
            self.finished_requests.append(req)
            self._maybe_issue_closed_loop(t)
        self._try_start(node, t)
        self._drain_pending(t)

    def _on_retry(self, t: float) -> None:
        self._retry_scheduled = False
        self._drain_pending(t)

    def _on_join(self, spec: NodeSpec, t: float) -> None:
        if spec.node_id in self.nodes:
            raise ScenarioError(f"node_join: duplicate node_id {spec.node_id!r}")
        node = _SimNode(spec)
        self.nodes[spec.node_id] = node
        self.sched.add_node(node.state)
        self._schedule_monitor(spec.node_id, t)
        self._recompute_capabilities()
        self._trace(EventKind.NODE_JOIN, {"node": spec.node_id})
        self._drain_pending(t)

    def _on_leave(self, node_id: str, t: float) -> None:
        node = self.nodes.get(node_id)
        if node is None or not node.online:
            raise ScenarioError(f"node_leave: unknown or offline node {node_id!r}")
        node.online = False
        aborted: list[_StageJob] = []
        if node.current is not None:
            node.current.cancelled = True
            node.busy[-1][1] = t  # truncate the interrupted execution span
            aborted.append(node.current)
            node.current = None
        aborted.extend(node.queue)
        for job in node.queue:
            job.cancelled = True
        node.queue.clear()
        for job in aborted:
            self.sched.cancel(job.task.task_id)
        self.sched.remove_node(node_id)
        self._recompute_capabilities()
        self._trace(EventKind.NODE_LEAVE, {"node": node_id, "aborted": len(aborted)})
        for job in aborted:
            req = job.request
            req.rescheduled += 1
            self.rescheduled_total += 1
            self._dispatch(req, t, was_in_flight=True)
        self._drain_pending(t)

    def _on_monitor(self, node_id: str, t: float) -> None:
        node = self.nodes.get(node_id)
        if node is None or not node.online:
            return
        busy = node.busy_in(t - _SAMPLE_WINDOW_MS, t)
        memory = node.spec.profile.memory
        mem_used = memory - node.state.mem_avail
        sample = ResourceSample(
            time=t,
            node_id=node_id,
            cpu_pct=min(100.0, busy / _SAMPLE_WINDOW_MS * 100.0),
            mem_used=mem_used,
            mem_pct=(mem_used / memory * 100.0) if memory > 0 else 0.0,
            net_rx=node.rx_bytes,
            net_tx=node.tx_bytes,
        )
        self.samples.append(sample)
        node.state.current_load = node.load_at(t)
        self._trace(EventKind.MONITOR_SAMPLE, {"node": node_id})
        self._drain_pending(t)

    def _update_starvation(self, t: float) -> None:
        starving = bool(self._pending) and not any(n.online for n in self.nodes.values())
        if starving and self._starved_since is None:
            self._starved_since = t
        elif not starving and self._starved_since is not None:
            self.starvation_ms += t - self._starved_since
            self._starved_since = None

    def _check_conservation(self) -> None:
        in_system = self.completed + len(self._pending) + self._in_flight
        if self.submitted != in_system:
            raise RuntimeError(
                f"task conservation violated at t={self.now}: "
                f"{self.submitted} submitted vs {in_system} accounted"
            )

    # -- run ---------------------------------------------------------------

    def run(self) -> MetricsReport:
        self._schedule_arrivals()
        for node_id in self.nodes:
            self._schedule_monitor(node_id, 0.0)
        for change in self.scenario.membership:
            payload = change.spec if change.action == "join" else change.node_id
            self._push(change.time_ms, _PRIO_MEMBERSHIP, change.action, payload)

        handlers = {
            "arrival": lambda payload, t: self._on_arrival(t),
            "complete": self._on_complete,
            "retry": lambda payload, t: self._on_retry(t),
            "join": self._on_join,
            "leave": self._on_leave,
            "monitor": self._on_monitor,
        }
        while self._heap:
            time_ms, _prio, _seq, tag, payload = heapq.heappop(self._heap)
            if tag == "retry" and not self._pending:
                self._retry_scheduled = False
                continue
            self.now = time_ms
            handlers[tag](payload, time_ms)
            self._update_starvation(time_ms)
            self._check_conservation()
        if self._starved_since is not None:
            self.starvation_ms += self.now - self._starved_since
            self._starved_since = None
        return self._report()

    def _report(self) -> MetricsReport:
        warmup = self.scenario.warmup_ms
        horizon = self.horizon
        # Measurement phase = completions inside (warmup, warmup + measurement].
        measured = [
            r
            for r in self.finished_requests
            if warmup < r.completion_time <= horizon
        ]
        request_records = [
            TaskRecord(
                task_id=r.rid,
                node_id=r.last_node or "",
                submit_time=r.submit_time,
                start_time=r.first_start if r.first_start is not None else r.submit_time,
                end_time=r.completion_time,
            )
            for r in measured
        ]
        stage_measured = [
            rec for rec in self.stage_records if warmup < rec.end_time <= horizon
        ]
        samples_measured = [s for s in self.samples if warmup < s.time <= horizon]
        comm_measured = [ms for (t, ms) in self.comm_events if warmup < t <= horizon]
        bytes_measured = sum(b for (t, b) in self.transfer_events if warmup < t <= horizon)
        stability = None
        if measured:
            stable = sum(
                1
                for r in measured
                if r.rescheduled == 0 and r.max_queue_wait <= self.scenario.queue_timeout_ms
            )
            stability = stable / len(measured)
        return aggregate(
            request_records,
            samples_measured,
            self.scenario.measurement_ms,
            stage_records=stage_measured,
            comm_overhead_samples=comm_measured,
            scenario=self.scenario.name,
            seed=self.seed,
            warmup_ms=warmup,
            stability_score=stability,
            scheduling_overhead_ms=self.scenario.scheduling_cost_ms,
            load_balance_l=self.plan.balance,
            transferred_bytes=bytes_measured,
            submitted_tasks=self.submitted,
            completed_tasks=self.completed,
            rescheduled_tasks=self.rescheduled_total,
            queued_tasks_end=len(self._pending),
            in_flight_tasks_end=self._in_flight,
            starvation_ms=self.starvation_ms,
        )


def run_scenario(scenario: Scenario, seed: int | None = None) -> MetricsReport:
    """Execute warm-up plus measurement phases and aggregate the report.

    Fully deterministic for a fixed (scenario, seed): running twice yields
    byte-identical serialized reports.
    """
    return Simulation(scenario, seed=seed).run()
