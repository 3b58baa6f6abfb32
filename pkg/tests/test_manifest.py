"""Manifest parsing, validation, slicing, and round-trip tests."""
import pytest
from hypothesis import given, strategies as st

from edgeshard.fixtures import load_builtin, mobilenet_v2_manifest
from edgeshard.manifest import (
    LayerKind,
    LayerSpec,
    ManifestError,
    ModelManifest,
    parse_manifest,
    serialize_manifest,
    sub_manifest,
)


def conv(i, kh=3, kw=3, cin=3, cout=32, params=0):
    return LayerSpec(index=i, kind=LayerKind.CONV2D, kernel_h=kh, kernel_w=kw,
                     c_in=cin, c_out=cout, param_count=params)


def linear(i, nin=1280, nout=1000, params=0):
    return LayerSpec(index=i, kind=LayerKind.LINEAR, n_in=nin, n_out=nout, param_count=params)


def other(i, params=0):
    return LayerSpec(index=i, kind=LayerKind.OTHER, param_count=params)


class TestParsing:
    def test_minimal_conv_document(self):
        doc = '# tiny\n{"index": 0, "kind": "conv2d", "kernel_h": 3, "kernel_w": 3, "c_in": 3, "c_out": 32, "param_count": 864}\n'
        m = parse_manifest(doc)
        assert m.name == "tiny"
        assert len(m) == 1
        assert m.layers[0].kind is LayerKind.CONV2D

    def test_missing_linear_field_names_layer(self):
        doc = '{"index": 0, "kind": "linear", "n_in": 16, "param_count": 0}'
        with pytest.raises(ManifestError, match="layer 0"):
            parse_manifest(doc)

    def test_bundled_fixture_has_141_layers(self):
        m = load_builtin("mobilenet_v2")
        assert len(m) == 141
        assert m.name == "mobilenet_v2"

    def test_fixture_file_matches_programmatic_enumeration(self):
        assert load_builtin("mobilenet_v2") == mobilenet_v2_manifest()

    def test_invalid_json_line(self):
        with pytest.raises(ManifestError, match="line 1"):
            parse_manifest('{"index": 0, broken')

    def test_unknown_kind(self):
        with pytest.raises(ManifestError, match="unknown kind"):
            parse_manifest('{"index": 0, "kind": "pool", "param_count": 0}')

    def test_unknown_field_rejected(self):
        with pytest.raises(ManifestError, match="unknown fields"):
            parse_manifest('{"index": 0, "kind": "other", "param_count": 0, "stride": 2}')

    def test_conv_with_linear_fields_rejected(self):
        doc = '{"index": 0, "kind": "conv2d", "kernel_h": 1, "kernel_w": 1, "c_in": 1, "c_out": 1, "n_in": 4, "param_count": 0}'
        with pytest.raises(ManifestError, match="must not carry"):
            parse_manifest(doc)

    def test_empty_document(self):
        with pytest.raises(ManifestError, match="at least one layer"):
            parse_manifest("# empty\n")

    def test_non_contiguous_indices(self):
        doc = (
            '{"index": 0, "kind": "other", "param_count": 0}\n'
            '{"index": 2, "kind": "other", "param_count": 0}'
        )
        with pytest.raises(ManifestError, match="layer 2"):
            parse_manifest(doc)

    def test_comment_after_layers_rejected(self):
        doc = '{"index": 0, "kind": "other", "param_count": 0}\n# stray'
        with pytest.raises(ManifestError, match="comments"):
            parse_manifest(doc)


class TestValidation:
    def test_other_with_conv_fields(self):
        with pytest.raises(ManifestError, match="only param_count"):
            LayerSpec(index=0, kind=LayerKind.OTHER, c_in=3, param_count=0)

    def test_conv_zero_channel(self):
        with pytest.raises(ManifestError, match="c_in"):
            conv(0, cin=0)

    def test_negative_param_count(self):
        with pytest.raises(ManifestError, match="param_count"):
            other(0, params=-1)

    def test_zero_param_other_is_legal(self):
        m = ModelManifest(name="acts", layers=(other(0), other(1)))
        assert all(l.param_count == 0 for l in m.layers)


class TestRoundTrip:
    def test_serialize_parse_identity(self):
        m = ModelManifest(name="rt", layers=(conv(0, params=864), other(1, 64), linear(2, params=4)))
        assert parse_manifest(serialize_manifest(m)) == m

    def test_fixture_round_trip(self):
        m = load_builtin("mobilenet_v2")
        assert parse_manifest(serialize_manifest(m)) == m

    @given(
        st.lists(
            st.sampled_from(["conv", "linear", "other"]),
            min_size=1,
            max_size=20,
        )
    )
    def test_random_manifests_round_trip(self, kinds):
        layers = []
        for i, k in enumerate(kinds):
            if k == "conv":
                layers.append(conv(i, params=i))
            elif k == "linear":
                layers.append(linear(i, params=i))
            else:
                layers.append(other(i, params=i))
        m = ModelManifest(name="gen", layers=tuple(layers))
        assert parse_manifest(serialize_manifest(m)) == m


class TestSubManifest:
    def test_paper_two_part_split_sizes(self):
        m = load_builtin("mobilenet_v2")
        first = sub_manifest(m, 0, 115)
        assert len(first) == 116

    def test_full_range_identity_except_name(self):
        m = ModelManifest(name="x", layers=(other(0), other(1, 5), other(2)))
        full = sub_manifest(m, 0, 2)
        assert full.layers == m.layers
        assert full.name != m.name

    def test_singleton_range(self):
        m = ModelManifest(name="x", layers=tuple(other(i, params=i) for i in range(5)))
        s = sub_manifest(m, 4, 4)
        assert len(s) == 1
        assert s.layers[0].param_count == 4
        assert s.layers[0].index == 0

    def test_out_of_bounds(self):
        m = ModelManifest(name="x", layers=(other(0),))
        with pytest.raises(ManifestError, match="out of bounds"):
            sub_manifest(m, 0, 1)

    def test_concatenation_reconstructs_layer_sequence(self):
        m = load_builtin("mobilenet_v2")
        cuts = [(0, 50), (51, 107), (108, 140)]
        rebuilt = []
        for lo, hi in cuts:
            rebuilt.extend(sub_manifest(m, lo, hi).layers)
        assert len(rebuilt) == len(m)
        for i, (orig, got) in enumerate(zip(m.layers, rebuilt)):
            assert got == LayerSpec(
                index=got.index,
                kind=orig.kind,
                kernel_h=orig.kernel_h,
                kernel_w=orig.kernel_w,
                c_in=orig.c_in,
                c_out=orig.c_out,
                n_in=orig.n_in,
                n_out=orig.n_out,
                param_count=orig.param_count,
            ), f"layer {i} attributes changed"
