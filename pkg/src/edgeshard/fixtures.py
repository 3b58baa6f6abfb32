"""Bundled model descriptions used by the CLI, the simulator, and tests."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .manifest import LayerKind, LayerSpec, ModelManifest, parse_manifest

# Inverted-residual stack: (expansion factor, output channels, repeats).
_MOBILENET_V2_BLOCKS = (
    (1, 16, 1),
    (6, 24, 2),
    (6, 32, 3),
    (6, 64, 4),
    (6, 96, 3),
    (6, 160, 3),
    (6, 320, 1),
)

MOBILENET_V2_HEADER = (
    "Leaf-module enumeration of MobileNetV2 (width 1.0, 1000 classes): every",
    "convolution, batch norm, activation, dropout, and linear module is one",
    "layer, 141 in total. Depthwise convolutions are recorded with the full",
    "channel counts their module attributes report; grouping is not modeled.",
    "param_count is the learnable parameter count (batch norms count weight",
    "and bias; convolutions here have no bias).",
)


def mobilenet_v2_layers() -> list[LayerSpec]:
    """Construct the 141-layer enumeration described in MOBILENET_V2_HEADER."""
    layers: list[LayerSpec] = []

    def conv(kh, kw, cin, cout, params):
        layers.append(
            LayerSpec(
                index=len(layers),
                kind=LayerKind.CONV2D,
                kernel_h=kh,
                kernel_w=kw,
                c_in=cin,
                c_out=cout,
                param_count=params,
            )
        )

    def other(params=0):
        layers.append(LayerSpec(index=len(layers), kind=LayerKind.OTHER, param_count=params))

    def bn(channels):
        other(2 * channels)

    conv(3, 3, 3, 32, 3 * 3 * 3 * 32)
    bn(32)
    other()  # ReLU6
    in_c = 32
    for t, out_c, repeats in _MOBILENET_V2_BLOCKS:
        for _ in range(repeats):
            hidden = in_c * t
            if t != 1:
                conv(1, 1, in_c, hidden, in_c * hidden)
                bn(hidden)
                other()
            conv(3, 3, hidden, hidden, 9 * hidden)  # depthwise
            bn(hidden)
            other()
            conv(1, 1, hidden, out_c, hidden * out_c)
            bn(out_c)
            in_c = out_c
    conv(1, 1, 320, 1280, 320 * 1280)
    bn(1280)
    other()
    other()  # dropout
    layers.append(
        LayerSpec(
            index=len(layers),
            kind=LayerKind.LINEAR,
            n_in=1280,
            n_out=1000,
            param_count=1280 * 1000 + 1000,
        )
    )
    return layers


def mobilenet_v2_manifest() -> ModelManifest:
    return ModelManifest(name="mobilenet_v2", layers=tuple(mobilenet_v2_layers()))


def mobilenet_v2_document() -> str:
    """The bundled manifest document, header comments included."""
    from .manifest import serialize_manifest

    doc = serialize_manifest(mobilenet_v2_manifest())
    name_line, _, rest = doc.partition("\n")
    header = "\n".join(f"# {line}" for line in MOBILENET_V2_HEADER)
    return f"{name_line}\n{header}\n{rest}"


def builtin_names() -> tuple[str, ...]:
    return ("mobilenet_v2",)


def load_builtin(name: str) -> ModelManifest:
    if name not in builtin_names():
        raise KeyError(f"unknown builtin manifest {name!r}")
    data = resources.files("edgeshard").joinpath(f"data/{name}.jsonl").read_text("utf-8")
    return parse_manifest(data)


def resolve_manifest(ref: str, base_dir=None) -> ModelManifest:
    """Resolve a manifest reference: ``builtin:<name>`` or a file path
    (relative paths resolve against ``base_dir`` when given)."""
    if ref.startswith("builtin:"):
        return load_builtin(ref.split(":", 1)[1])
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    with open(path, "r", encoding="utf-8") as fh:
        return parse_manifest(fh.read())
