"""edgeshard: partition layered inference workloads across heterogeneous edge
nodes, schedule tasks with a weighted-score selector, and validate the whole
pipeline inside a deterministic cluster simulator."""

from .cost import CostProfile, cost_profile, layer_cost, target_cost
from .manifest import (
    LayerKind,
    LayerSpec,
    ManifestError,
    ModelManifest,
    load_manifest,
    parse_manifest,
    serialize_manifest,
    sub_manifest,
)
from .metrics import MetricsReport, aggregate, compare, parse_report, serialize_report
from .partition import (
    CapabilityWeights,
    NodeCapability,
    PartitionPlan,
    allocation_ratios,
    balance_metric,
    capability_partition,
    capability_score,
    greedy_partition,
    plan_for_nodes,
    rebalance,
)
from .scheduler import (
    NodeState,
    PerformanceCache,
    Scheduler,
    SchedulerConfig,
    ScoreWeights,
    TaskRecord,
    TaskRequest,
    select_node,
    total_score,
)
from .sim import (
    DEFAULT_SEED,
    ExecModel,
    NodeProfile,
    PROFILES,
    ResourceSample,
    Scenario,
    ScenarioError,
    SimEvent,
    Simulation,
    exec_time,
    load_scenario,
    parse_scenario,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "CapabilityWeights",
    "CostProfile",
    "DEFAULT_SEED",
    "ExecModel",
    "LayerKind",
    "LayerSpec",
    "ManifestError",
    "MetricsReport",
    "ModelManifest",
    "NodeCapability",
    "NodeProfile",
    "NodeState",
    "PROFILES",
    "PartitionPlan",
    "PerformanceCache",
    "ResourceSample",
    "Scenario",
    "ScenarioError",
    "Scheduler",
    "SchedulerConfig",
    "ScoreWeights",
    "SimEvent",
    "Simulation",
    "TaskRecord",
    "TaskRequest",
    "aggregate",
    "allocation_ratios",
    "balance_metric",
    "capability_partition",
    "capability_score",
    "compare",
    "cost_profile",
    "exec_time",
    "greedy_partition",
    "layer_cost",
    "load_manifest",
    "load_scenario",
    "parse_manifest",
    "parse_report",
    "parse_scenario",
    "plan_for_nodes",
    "rebalance",
    "run_scenario",
    "select_node",
    "serialize_manifest",
    "serialize_report",
    "sub_manifest",
    "target_cost",
    "total_score",
]
