"""Contiguous model partitioning balanced by cost and node capability.

Partitions are built by a greedy prefix walk against per-partition cost
targets, then optionally refined by a boundary-shift local search that
descends on the balance metric L (mean absolute deviation of partition
costs from their average).
"""
from __future__ import annotations

from dataclasses import dataclass

from .cost import CostProfile

# Relative slack on the greedy closing comparison. Guards float ties so that
# capability targets derived from equal scores reproduce the uniform split
# boundaries bit-for-bit.
_CLOSE_SLACK = 1e-12


@dataclass(frozen=True)
class NodeCapability:
    """Static capability of a node: CPU core-fraction and memory in MiB."""

    node_id: str
    cpu: float
    memory: float

    def __post_init__(self):
        if self.cpu < 0 or self.memory < 0:
            raise ValueError(f"node {self.node_id}: cpu and memory must be >= 0")
        if self.cpu == 0 and self.memory == 0:
            raise ValueError(f"node {self.node_id}: cpu and memory cannot both be zero")


@dataclass(frozen=True)
class CapabilityWeights:
    """Relative importance of CPU vs memory in the capability score."""

    w_cpu: float = 0.5
    w_mem: float = 0.5

    def __post_init__(self):
        for name, w in (("w_cpu", self.w_cpu), ("w_mem", self.w_mem)):
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {w}")
        if abs(self.w_cpu + self.w_mem - 1.0) > 1e-9:
            raise ValueError("capability weights must sum to 1")


@dataclass(frozen=True)
class PartitionPlan:
    """Ordered, contiguous layer intervals covering the whole model."""

    boundaries: tuple[tuple[int, int], ...]
    per_partition_cost: tuple[float, ...]
    assigned_node: tuple[str | None, ...] | None = None
    balance: float = 0.0

    def __post_init__(self):
        if self.assigned_node is None:
            object.__setattr__(self, "assigned_node", (None,) * len(self.boundaries))
        if len(self.per_partition_cost) != len(self.boundaries):
            raise ValueError("per_partition_cost must align with boundaries")
        if len(self.assigned_node) != len(self.boundaries):
            raise ValueError("assigned_node must align with boundaries")
        expected_start = 0
        for lo, hi in self.boundaries:
            if lo != expected_start or hi < lo:
                raise ValueError(f"intervals must be contiguous and non-empty, got {self.boundaries}")
            expected_start = hi + 1

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in self.boundaries)


def cluster_norm(nodes) -> tuple[float, float]:
    """Cluster-wide maxima used to normalize capability components."""
    nodes = list(nodes)
    if not nodes:
        raise ValueError("cluster_norm needs at least one node")
    return max(n.cpu for n in nodes), max(n.memory for n in nodes)


def capability_score(node: NodeCapability, weights: CapabilityWeights, norm) -> float:
    """Weighted, min-max normalized capability in [0, 1]."""
    max_cpu, max_mem = norm
    if max_cpu <= 0 or max_mem <= 0:
        raise ValueError("normalization maxima must be > 0")
    return weights.w_cpu * (node.cpu / max_cpu) + weights.w_mem * (node.memory / max_mem)


def allocation_ratios(scores) -> list[float]:
    """Each node's share of the model: score over the score sum."""
    scores = list(scores)
    total = sum(scores)
    if total <= 0:
        raise ValueError("at least one capability score must be > 0")
    return [s / total for s in scores]


def _mean_abs_dev(costs) -> float:
    avg = sum(costs) / len(costs)
    return sum(abs(c - avg) for c in costs) / len(costs)


def balance_metric(plan: PartitionPlan) -> float:
    """L: mean absolute deviation of per-partition costs from their mean."""
    return _mean_abs_dev(plan.per_partition_cost)


def _greedy_split(per_layer, targets) -> list[tuple[int, int]]:
    """Walk layers in order, closing a partition once its running cost meets
    the current target; remaining layers always land in the final partition.

    A partition never closes early if that would leave fewer layers than
    partitions still to fill, and closes forcibly when the remaining layers
    are exactly enough for the remaining partitions.
    """
    n = len(per_layer)
    k = len(targets)
    if k < 1:
        raise ValueError("need at least one partition")
    if n < k:
        raise ValueError(f"cannot split {n} layers into {k} partitions")
    bounds: list[tuple[int, int]] = []
    start = 0
    running = 0.0
    for i, c in enumerate(per_layer):
        running += c
        closed = len(bounds)
        if closed == k - 1:
            continue
        parts_left = k - closed - 1
        layers_left = n - i - 1
        met = running >= targets[closed] * (1.0 - _CLOSE_SLACK)
        if layers_left == parts_left or (met and layers_left >= parts_left):
            bounds.append((start, i))
            start = i + 1
            running = 0.0
    bounds.append((start, n - 1))
    return bounds


def _make_plan(bounds, profile: CostProfile, assigned=None) -> PartitionPlan:
    costs = tuple(profile.range_cost(lo, hi) for lo, hi in bounds)
    return PartitionPlan(
        boundaries=tuple(bounds),
        per_partition_cost=costs,
        assigned_node=tuple(assigned) if assigned is not None else None,
        balance=_mean_abs_dev(costs),
    )


def greedy_partition(profile: CostProfile, num_partitions: int) -> PartitionPlan:
    """Split into ``num_partitions`` contiguous parts against a uniform target."""
    if num_partitions < 1:
        raise ValueError("num_partitions must be >= 1")
    share = profile.total * (1.0 / num_partitions)
    bounds = _greedy_split(profile.per_layer, [share] * num_partitions)
    return _make_plan(bounds, profile)


def capability_partition(profile: CostProfile, ratios, node_ids=None) -> PartitionPlan:
    """Split against per-node cost targets ``ratio_i * total``.

    Ratios are expected in descending-capability order; partition i is
    assigned node_ids[i] when given.
    """
    ratios = list(ratios)
    if not ratios:
        raise ValueError("need at least one ratio")
    if any(r <= 0 for r in ratios):
        raise ValueError("allocation ratios must be > 0")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("allocation ratios must sum to 1")
    if node_ids is not None and len(node_ids) != len(ratios):
        raise ValueError("node_ids must align with ratios")
    targets = [r * profile.total for r in ratios]
    bounds = _greedy_split(profile.per_layer, targets)
    return _make_plan(bounds, profile, assigned=node_ids)


def plan_for_nodes(
    profile: CostProfile,
    nodes,
    weights: CapabilityWeights | None = None,
) -> PartitionPlan:
    """Capability-weighted plan: strongest node takes the earliest partition."""
    nodes = list(nodes)
    weights = weights or CapabilityWeights()
    norm = cluster_norm(nodes)
    scored = [(capability_score(n, weights, norm), n.node_id) for n in nodes]
    # Descending capability; node_id breaks ties deterministically.
    order = sorted(range(len(nodes)), key=lambda i: (-scored[i][0], scored[i][1]))
    ratios = allocation_ratios([scored[i][0] for i in order])
    return capability_partition(profile, ratios, node_ids=[scored[i][1] for i in order])


def _shift(bounds: tuple, j: int, direction: str) -> tuple | None:
    """Move the boundary between partitions j and j+1 one layer, or None if
    the shift would empty a partition."""
    lo_a, hi_a = bounds[j]
    lo_b, hi_b = bounds[j + 1]
    if direction == "left":
        if hi_a <= lo_a:
            return None
        moved = ((lo_a, hi_a - 1), (hi_a, hi_b))
    else:
        if hi_b <= lo_b:
            return None
        moved = ((lo_a, lo_b), (lo_b + 1, hi_b))
    return bounds[:j] + moved + bounds[j + 2 :]


def _neighbors(bounds: tuple):
    """Candidate plans one move away: single-boundary shifts, then correlated
    shifts of two adjacent boundaries (escapes hills where both cuts must move
    together, e.g. sliding a whole middle partition)."""
    for j in range(len(bounds) - 1):
        for direction in ("left", "right"):
            nb = _shift(bounds, j, direction)
            if nb is not None:
                yield nb
    for j in range(len(bounds) - 2):
        for d1 in ("left", "right"):
            for d2 in ("left", "right"):
                nb = _shift(bounds, j, d1)
                if nb is None:
                    continue
                nb = _shift(nb, j + 1, d2)
                if nb is not None:
                    yield nb


# Plateau exploration budget: states visited while probing equal-L regions.
_PLATEAU_BUDGET = 512


def rebalance(plan: PartitionPlan, profile: CostProfile, max_iters: int = 100) -> PartitionPlan:
    """Boundary-shift local search that never increases L.

    Each iteration tries moving every internal boundary one layer left or
    right and keeps the single move that most reduces L, preferring the
    leftmost boundary and then the leftward shift on ties. When no move
    strictly improves L, equal-L states (common around zero-cost layers) are
    probed breadth-first; the walk commits only if a strictly better state is
    reachable, so a plan with no improvement anywhere is returned unchanged.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if len(plan.boundaries) <= 1:
        return plan

    def l_of(bounds: tuple) -> float:
        return _mean_abs_dev([profile.range_cost(lo, hi) for lo, hi in bounds])

    bounds = tuple(plan.boundaries)
    current = l_of(bounds)
    for _ in range(max_iters):
        best_l = current
        best = None
        for nb in _neighbors(bounds):
            l = l_of(nb)
            if l < best_l:
                best_l, best = l, nb
        if best is not None:
            bounds, current = best, best_l
            continue
        # Strict descent converged; look for an exit across the equal-L plateau.
        tol = 1e-9 * max(current, 1.0)
        seen = {bounds}
        frontier = [bounds]
        budget = _PLATEAU_BUDGET
        found = None
        while frontier and found is None:
            state = frontier.pop(0)
            for nb in _neighbors(state):
                if nb in seen:
                    continue
                l = l_of(nb)
                if l < current:
                    found = nb
                    break
                if abs(l - current) <= tol and budget > 0:
                    seen.add(nb)
                    frontier.append(nb)
                    budget -= 1
        if found is None:
            break
        bounds, current = found, l_of(found)
    return _make_plan(list(bounds), profile, assigned=plan.assigned_node)
