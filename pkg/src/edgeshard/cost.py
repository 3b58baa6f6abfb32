"""Per-layer computational cost model and aggregate cost profiles.

Cost is a dimensionless operation count: kernel-channel product for
convolutions, feature product for linear layers, parameter count otherwise.
Spatial extent and strides are deliberately not modeled.
"""
from __future__ import annotations

from dataclasses import dataclass

from .manifest import LayerKind, LayerSpec, ModelManifest


def layer_cost(layer: LayerSpec) -> int:
    """Workload proxy for one layer, by kind."""
    if layer.kind is LayerKind.CONV2D:
        return layer.kernel_h * layer.kernel_w * layer.c_in * layer.c_out
    if layer.kind is LayerKind.LINEAR:
        return layer.n_in * layer.n_out
    return layer.param_count


@dataclass(frozen=True)
class CostProfile:
    """Per-layer costs with prefix sums, aligned with layer indices."""

    per_layer: tuple[float, ...]
    cumulative: tuple[float, ...]
    total: float

    @classmethod
    def from_costs(cls, costs) -> "CostProfile":
        costs = tuple(costs)
        if not costs:
            raise ValueError("cost profile needs at least one layer")
        if any(c < 0 for c in costs):
            raise ValueError("layer costs must be non-negative")
        cumulative = []
        running = 0
        for c in costs:
            running += c
            cumulative.append(running)
        return cls(per_layer=costs, cumulative=tuple(cumulative), total=running)

    @property
    def relative(self) -> tuple[float, ...]:
        """Each layer's share of the total; uniform 1/n when the total is 0."""
        n = len(self.per_layer)
        if self.total <= 0:
            return tuple(1.0 / n for _ in range(n))
        return tuple(c / self.total for c in self.per_layer)

    def range_cost(self, start: int, end: int) -> float:
        """Cost of the inclusive layer range [start, end]."""
        base = self.cumulative[start - 1] if start > 0 else 0
        return self.cumulative[end] - base


def cost_profile(m: ModelManifest) -> CostProfile:
    return CostProfile.from_costs(layer_cost(layer) for layer in m.layers)


def target_cost(profile: CostProfile, num_partitions: int) -> float:
    """Per-partition cost target: total divided by partition count."""
    if num_partitions < 1:
        raise ValueError(f"num_partitions must be >= 1, got {num_partitions}")
    return profile.total / num_partitions
