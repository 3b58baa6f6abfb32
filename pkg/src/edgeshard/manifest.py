"""Layered model descriptions: parsing, validation, and slicing.

A manifest is the framework-free stand-in for a real model: an ordered
sequence of layers, each carrying just enough shape information to cost it.
Manifests are immutable once built and safe to share across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum


class ManifestError(ValueError):
    """Malformed or invalid manifest document."""


class LayerKind(Enum):
    CONV2D = "conv2d"
    LINEAR = "linear"
    OTHER = "other"


_CONV_FIELDS = ("kernel_h", "kernel_w", "c_in", "c_out")
_LINEAR_FIELDS = ("n_in", "n_out")
_ALL_KEYS = ("index", "kind", *_CONV_FIELDS, *_LINEAR_FIELDS, "param_count")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a sequential model.

    Conv2D layers carry kernel dims and channel counts, Linear layers carry
    feature counts, and everything else carries only its parameter count.
    """

    index: int
    kind: LayerKind
    kernel_h: int | None = None
    kernel_w: int | None = None
    c_in: int | None = None
    c_out: int | None = None
    n_in: int | None = None
    n_out: int | None = None
    param_count: int = 0

    def __post_init__(self):
        if self.index < 0:
            raise ManifestError(f"layer {self.index}: index must be >= 0")
        if self.param_count < 0:
            raise ManifestError(f"layer {self.index}: param_count must be >= 0")
        conv_set = {f: getattr(self, f) for f in _CONV_FIELDS if getattr(self, f) is not None}
        lin_set = {f: getattr(self, f) for f in _LINEAR_FIELDS if getattr(self, f) is not None}
        if self.kind is LayerKind.CONV2D:
            missing = [f for f in _CONV_FIELDS if getattr(self, f) is None]
            if missing:
                raise ManifestError(f"layer {self.index}: conv2d missing {', '.join(missing)}")
            if lin_set:
                raise ManifestError(
                    f"layer {self.index}: conv2d must not carry {', '.join(sorted(lin_set))}"
                )
            for f in _CONV_FIELDS:
                if getattr(self, f) < 1:
                    raise ManifestError(f"layer {self.index}: {f} must be >= 1")
        elif self.kind is LayerKind.LINEAR:
            missing = [f for f in _LINEAR_FIELDS if getattr(self, f) is None]
            if missing:
                raise ManifestError(f"layer {self.index}: linear missing {', '.join(missing)}")
            if conv_set:
                raise ManifestError(
                    f"layer {self.index}: linear must not carry {', '.join(sorted(conv_set))}"
                )
            for f in _LINEAR_FIELDS:
                if getattr(self, f) < 1:
                    raise ManifestError(f"layer {self.index}: {f} must be >= 1")
        else:
            extra = sorted(conv_set) + sorted(lin_set)
            if extra:
                raise ManifestError(
                    f"layer {self.index}: kind 'other' carries only param_count, got {', '.join(extra)}"
                )


@dataclass(frozen=True)
class ModelManifest:
    """Named, ordered sequence of layers; order is execution order."""

    name: str
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if not self.layers:
            raise ManifestError("manifest must contain at least one layer")
        for pos, layer in enumerate(self.layers):
            if layer.index != pos:
                raise ManifestError(
                    f"layer {layer.index}: indices must be contiguous from 0 (expected {pos})"
                )

    def __len__(self) -> int:
        return len(self.layers)


def _layer_from_obj(obj: dict, line_no: int) -> LayerSpec:
    if not isinstance(obj, dict):
        raise ManifestError(f"line {line_no}: expected a JSON object")
    unknown = sorted(set(obj) - set(_ALL_KEYS))
    idx = obj.get("index", "?")
    if unknown:
        raise ManifestError(f"layer {idx}: unknown fields {', '.join(unknown)}")
    for required in ("index", "kind", "param_count"):
        if required not in obj:
            raise ManifestError(f"layer {idx}: missing required field '{required}'")
    try:
        kind = LayerKind(obj["kind"])
    except ValueError:
        raise ManifestError(f"layer {idx}: unknown kind {obj['kind']!r}") from None
    fields = {k: v for k, v in obj.items() if k != "kind"}
    for key, value in fields.items():
        if not isinstance(value, int) or isinstance(value, bool):
            raise ManifestError(f"layer {idx}: field '{key}' must be an integer")
    return LayerSpec(kind=kind, **fields)


def parse_manifest(text: str) -> ModelManifest:
    """Parse a manifest document (one JSON object per line).

    Leading lines starting with ``#`` are comments; the first one carries the
    model name. Raises :class:`ManifestError` naming the offending layer on
    any syntax or validation problem.
    """
    name = "model"
    layers = []
    in_header = True
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if in_header:
                comment = line.lstrip("#").strip()
                if comment and name == "model":
                    name = comment
                continue
            raise ManifestError(f"line {line_no}: comments are only allowed before the first layer")
        in_header = False
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {line_no}: invalid JSON ({exc.msg})") from None
        layers.append(_layer_from_obj(obj, line_no))
    if not layers:
        raise ManifestError("manifest must contain at least one layer")
    return ModelManifest(name=name, layers=tuple(layers))


def load_manifest(path) -> ModelManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_manifest(fh.read())


def _layer_to_obj(layer: LayerSpec) -> dict:
    obj = {"index": layer.index, "kind": layer.kind.value}
    if layer.kind is LayerKind.CONV2D:
        for f in _CONV_FIELDS:
            obj[f] = getattr(layer, f)
    elif layer.kind is LayerKind.LINEAR:
        for f in _LINEAR_FIELDS:
            obj[f] = getattr(layer, f)
    obj["param_count"] = layer.param_count
    return obj


def serialize_manifest(m: ModelManifest) -> str:
    """Canonical document form: fixed key order, one layer per line."""
    lines = [f"# {m.name}"]
    for layer in m.layers:
        lines.append(json.dumps(_layer_to_obj(layer), separators=(", ", ": ")))
    return "\n".join(lines) + "\n"


def sub_manifest(m: ModelManifest, start: int, end: int) -> ModelManifest:
    """Slice layers ``start..end`` (inclusive) into a fresh manifest.

    Layers are re-indexed from 0 and the name records the original range.
    """
    if start < 0 or end >= len(m.layers) or start > end:
        raise ManifestError(
            f"range [{start}, {end}] out of bounds for {len(m.layers)}-layer manifest"
        )
    sliced = tuple(
        replace(layer, index=i) for i, layer in enumerate(m.layers[start : end + 1])
    )
    return ModelManifest(name=f"{m.name}.layers{start}-{end}", layers=sliced)
