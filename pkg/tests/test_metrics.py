"""Metric aggregation, comparison, and canonical serialization tests."""
import pytest
from hypothesis import given, strategies as st

from edgeshard.metrics import (
    LatencyStats,
    MetricsError,
    MetricsReport,
    aggregate,
    compare,
    nearest_rank,
    parse_report,
    reports_csv,
    serialize_report,
    CSV_HEADER,
)
from edgeshard.scheduler import TaskRecord


def record(tid, submit, start, end, node="n1"):
    return TaskRecord(tid, node, submit, start, end)


def report_with(latency_mean=None, throughput=0.0, **kw):
    return MetricsReport(
        inference_latency_ms=LatencyStats(mean=latency_mean, p50=latency_mean, p95=latency_mean),
        throughput_rps=throughput,
        **kw,
    )


class TestNearestRank:
    def test_two_values_p50_is_lower(self):
        assert nearest_rank([100, 300], 50) == 100

    def test_p95_of_twenty(self):
        values = list(range(1, 21))
        assert nearest_rank(values, 95) == 19

    @given(st.lists(st.floats(min_value=0, max_value=1e6), min_size=1, max_size=100))
    def test_p50_never_exceeds_p95(self, values):
        assert nearest_rank(values, 50) <= nearest_rank(values, 95)


class TestAggregate:
    def test_single_task_identities(self):
        rep = aggregate([record("t", 0.0, 0.0, 200.0)], [], 1000.0)
        assert rep.inference_latency_ms.mean == 200.0
        assert rep.throughput_rps == 1.0

    def test_two_record_percentiles(self):
        recs = [record("a", 0.0, 0.0, 100.0), record("b", 0.0, 0.0, 300.0)]
        rep = aggregate(recs, [], 1000.0)
        assert rep.inference_latency_ms.mean == 200.0
        assert rep.inference_latency_ms.p50 in (100.0, 300.0)
        assert rep.inference_latency_ms.p50 == 100.0  # nearest-rank pins the lower

    def test_empty_records_give_null_markers_not_zeros(self):
        rep = aggregate([], [], 5000.0)
        assert rep.inference_latency_ms.mean is None
        assert rep.inference_latency_ms.p50 is None
        assert rep.cpu_pct is None
        assert rep.comm_overhead_ms is None
        assert rep.throughput_rps == 0.0

    def test_latency_is_end_to_end(self):
        rep = aggregate([record("t", 100.0, 150.0, 400.0)], [], 1000.0)
        assert rep.inference_latency_ms.mean == 300.0

    def test_throughput_times_seconds_equals_count(self):
        recs = [record(f"t{i}", 0.0, 0.0, 10.0) for i in range(7)]
        rep = aggregate(recs, [], 3000.0)
        assert rep.throughput_rps * (rep.measurement_ms / 1000.0) == pytest.approx(7.0)
        assert rep.measured_tasks == 7

    def test_zero_measurement_rejected(self):
        with pytest.raises(MetricsError):
            aggregate([], [], 0.0)


class TestCompare:
    def test_table_one_latency_delta(self):
        new = report_with(latency_mean=234.56, throughput=5.07)
        old = report_with(latency_mean=1082.53, throughput=0.96)
        table = compare(new, old)
        assert table["inference_latency_ms.mean"] == pytest.approx(-78.33, abs=0.1)

    def test_table_one_throughput_delta(self):
        new = report_with(latency_mean=234.56, throughput=5.07)
        old = report_with(latency_mean=1082.53, throughput=0.96)
        delta = compare(new, old)["throughput_rps"]
        # Direct ratio: (5.07 - 0.96) / 0.96 = +428.1%.
        assert delta == pytest.approx(428.1, abs=0.1)

    def test_identical_reports_zero_table(self):
        rep = report_with(latency_mean=100.0, throughput=2.0, cpu_pct=50.0)
        table = compare(rep, rep)
        assert all(v == 0.0 or v is None for v in table.values())
        assert table["inference_latency_ms.mean"] == 0.0

    def test_zero_baseline_reports_na(self):
        new = report_with(latency_mean=100.0, throughput=2.0)
        old = report_with(latency_mean=100.0, throughput=0.0)
        assert compare(new, old)["throughput_rps"] is None

    def test_missing_metric_reports_na(self):
        new = report_with(latency_mean=None)
        old = report_with(latency_mean=100.0)
        assert compare(new, old)["inference_latency_ms.mean"] is None

    def test_opposite_direction_flips_sign(self):
        a = report_with(latency_mean=100.0, throughput=4.0)
        b = report_with(latency_mean=200.0, throughput=2.0)
        ab = compare(a, b)
        ba = compare(b, a)
        assert ab["throughput_rps"] > 0 > ba["throughput_rps"]
        assert ab["inference_latency_ms.mean"] < 0 < ba["inference_latency_ms.mean"]


class TestSerialization:
    def test_round_trip_identity(self):
        rep = aggregate(
            [record("t", 0.0, 5.0, 100.0)],
            [],
            2000.0,
            scenario="x",
            seed=42,
            stability_score=1.0,
            load_balance_l=3.5,
        )
        assert parse_report(serialize_report(rep)) == rep

    def test_equal_reports_serialize_byte_identically(self):
        mk = lambda: aggregate([record("t", 0.0, 0.0, 50.0)], [], 1000.0, seed=1)
        assert serialize_report(mk()) == serialize_report(mk())

    def test_null_markers_survive_serialization(self):
        doc = serialize_report(aggregate([], [], 1000.0))
        assert '"mean": null' in doc
        rep = parse_report(doc)
        assert rep.inference_latency_ms.mean is None

    def test_schema_mismatch_rejected(self):
        with pytest.raises(MetricsError, match="schema"):
            parse_report('{"throughput_rps": 1.0}')

    def test_invalid_json_rejected(self):
        with pytest.raises(MetricsError, match="invalid"):
            parse_report("{nope")


class TestCsv:
    def test_header_and_row_count(self):
        rep = aggregate([record("t", 0.0, 0.0, 10.0)], [], 1000.0, scenario="s")
        out = reports_csv([rep, rep])
        lines = out.strip().split("\n")
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 3

    def test_null_fields_serialize_empty(self):
        rep = aggregate([], [], 1000.0)
        row = reports_csv([rep]).strip().split("\n")[1]
        assert ",," in row
