import json
import multiprocessing
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qualimeter.errors import (
    DuplicateObjectiveId,
    InsufficientHistory,
    InvalidFrequency,
    ModelHashMismatch,
    ModelRuleViolations,
    NoObjectives,
    PlanError,
)
from qualimeter.model import build_model
from qualimeter.process import (
    ISO25040_ACTIVITIES,
    EvaluationPlan,
    MeasurementContext,
    MeasurementRecord,
    Objective,
    RecordStore,
    execute_cycle,
    format_timestamp,
    ingest,
    init_phase,
    iso25040_coverage,
    parse_duration,
    parse_objectives_file,
    parse_timestamp,
    plan_phase,
    predict_trend,
    report_dir_name,
    write_report,
)
from qualimeter.qmdl import parse_qmdl
from treegen import EXAMPLES, attrs, leaf, node, two_leaf_model

T0 = datetime(2026, 3, 1, tzinfo=timezone.utc)
CTX = init_phase([Objective("o1", "release gate", "REQ-1")])


def rec(day: float, metric: str, value: float, source: str = "test") -> MeasurementRecord:
    return MeasurementRecord(T0 + timedelta(days=day), metric, value, source)


def line(day: float, metric: str, value) -> str:
    return json.dumps({"ts": format_timestamp(T0 + timedelta(days=day)), "metric": metric, "value": value})


# -- initial phase -------------------------------------------------------------


def test_init_phase_examples():
    assert init_phase([Objective("a", "x")]).improvement_notes == ()
    with pytest.raises(DuplicateObjectiveId):
        init_phase([Objective("a", "x"), Objective("b", "y"), Objective("a", "z")])
    with pytest.raises(NoObjectives):
        init_phase([])
    ctx = init_phase([{"id": "a", "text": "x"}], lessons=["l1", "l2"])
    assert ctx.improvement_notes == ("l1", "l2")


def test_objectives_file_and_context_round_trip():
    ctx = parse_objectives_file((EXAMPLES / "objectives.txt").read_text())
    assert [o.id for o in ctx.objectives] == ["rel-gate", "maint"]
    assert ctx.objectives[0].linked_requirement == "REQ-SYS-12"
    assert ctx.dependencies == ("static analysis toolchain",)
    assert len(ctx.improvement_notes) == 1
    assert MeasurementContext.from_dict(json.loads(json.dumps(ctx.to_dict()))) == ctx
    with pytest.raises(PlanError):
        parse_objectives_file("colour: blue\n")
    with pytest.raises(PlanError):
        parse_objectives_file("objective: only-id\n")


# -- planning phase ------------------------------------------------------------


def test_plan_covers_iso_activities_and_is_deterministic():
    m = two_leaf_model()
    a = plan_phase(CTX, m, frequency="1h", created_at=T0)
    b = plan_phase(CTX, m, frequency="1h", created_at=T0 + timedelta(days=3))
    assert iso25040_coverage(a) == set()
    assert a.plan_id == b.plan_id
    assert a.collection["frequency_seconds"] == 3600
    assert a.frequency == timedelta(hours=1)
    assert plan_phase(CTX, m, frequency="2h").plan_id != a.plan_id


def test_plan_json_round_trip():
    plan = plan_phase(CTX, two_leaf_model(), created_at=T0, criteria_notes=["gate at accept"])
    again = EvaluationPlan.from_dict(json.loads(plan.to_json()))
    assert again == plan
    assert [r.id for r in again.ruleset()] == ["R1", "R2", "R3", "R4", "R5", "R6"]


def test_plan_gates():
    bare = build_model(attrs(), node("q", 1, leaf("a", 1, []), leaf("b")))
    with pytest.raises(ModelRuleViolations):
        plan_phase(CTX, bare)
    with pytest.raises(InvalidFrequency):
        plan_phase(CTX, two_leaf_model(), frequency="often")
    with pytest.raises(PlanError):
        plan_phase({"objectives": []}, two_leaf_model())
    with pytest.raises(PlanError):
        plan_phase(CTX, two_leaf_model(), operator="mode")


def test_iso_coverage_examples():
    assert iso25040_coverage({}) == set(ISO25040_ACTIVITIES)
    plan = plan_phase(CTX, two_leaf_model(), created_at=T0)
    partial = {k: v for k, v in plan.iso25040_map.items() if v != "conclude-evaluation"}
    assert iso25040_coverage(partial) == {"conclude-evaluation"}
    # an activity mapped from a task of the wrong phase does not count
    assert "establish-requirements" in iso25040_coverage({"execution/collect-store-analyze": "establish-requirements"})


@pytest.mark.parametrize("text,seconds", [("24h", 86400), ("1h30m", 5400), ("7d", 604800), ("90s", 90), ("1w", 604800)])
def test_parse_duration(text, seconds):
    assert parse_duration(text).total_seconds() == seconds


@pytest.mark.parametrize("text", ["", "0h", "h", "1y", "-1h"])
def test_parse_duration_rejects(text):
    with pytest.raises(InvalidFrequency):
        parse_duration(text)


def test_timestamps():
    assert parse_timestamp("2026-03-01T08:00:00Z") == datetime(2026, 3, 1, 8, tzinfo=timezone.utc)
    assert parse_timestamp("2026-03-01T10:00:00+02:00") == datetime(2026, 3, 1, 8, tzinfo=timezone.utc)
    with pytest.raises(ValueError):
        parse_timestamp("2026-03-01T08:00:00")
    assert report_dir_name(datetime(2026, 3, 5, tzinfo=timezone.utc)) == "20260305T000000Z"


# -- ingestion -----------------------------------------------------------------


def test_ingest_examples(tmp_path):
    m = two_leaf_model()
    store = RecordStore(tmp_path / "r.jsonl")
    assert ingest([line(0, "a/m", 0.1), line(1, "a/m", 0.2), line(1, "b/m", 0.3)], store, m).appended == 3
    res = ingest([line(2, "a/m", 0.1), '{"ts": "yesterday", "metric": "a/m", "value": 1}', line(3, "b/m", 0.2)], store, m)
    assert res.appended == 2
    assert [(d.line, d.code) for d in res.diagnostics] == [(2, "BadTimestamp")]
    assert ingest([], store, m).appended == 0
    records, diags = store.snapshot()
    assert len(records) == 5 and diags == []


@pytest.mark.parametrize(
    "raw,code",
    [
        ("not json", "BadRecord"),
        ("[1, 2]", "BadRecord"),
        ('{"ts": "2026-03-01T00:00:00Z", "metric": "a/m"}', "BadRecord"),
        ('{"ts": "2026-03-01T00:00:00Z", "metric": "zz/m", "value": 1}', "UnknownMetricPath"),
        ('{"ts": "2026-03-01T00:00:00Z", "metric": "a/m", "value": "high"}', "NonNumericValue"),
        ('{"ts": "2026-03-01T00:00:00Z", "metric": "a/m", "value": true}', "NonNumericValue"),
        ('{"ts": "2026-03-01T00:00:00", "metric": "a/m", "value": 1}', "BadTimestamp"),
    ],
)
def test_ingest_diagnostic_codes(tmp_path, raw, code):
    res = ingest([raw], RecordStore(tmp_path / "r.jsonl"), two_leaf_model())
    assert res.appended == 0 and [d.code for d in res.diagnostics] == [code]


def test_snapshot_ignores_partial_trailing_line(tmp_path):
    path = tmp_path / "r.jsonl"
    store = RecordStore(path)
    store.append([rec(0, "a/m", 0.5)])
    with open(path, "a") as fh:
        fh.write('{"ts": "2026-03-0')
    records, _ = store.snapshot()
    assert len(records) == 1
    store.append([rec(1, "a/m", 0.6)])
    records, diags = store.snapshot()
    assert [r.raw_value for r in records] == [0.5, 0.6]
    assert [d.code for d in diags] == ["BadRecord"]


def _append_many(path: str, worker: int, count: int) -> None:
    store = RecordStore(path)
    for i in range(count):
        store.append([rec(i, "a/m", worker + i / 1000, source=f"w{worker}")])


def test_concurrent_appends_keep_every_line_whole(tmp_path):
    path = str(tmp_path / "r.jsonl")
    ctx = multiprocessing.get_context("fork")
    procs = [ctx.Process(target=_append_many, args=(path, w, 50)) for w in range(4)]
    for p in procs:
        p.start()
    for p in procs:
        p.join()
    records, diags = RecordStore(path).snapshot()
    assert diags == []
    assert len(records) == 200
    assert {r.source for r in records} == {"w0", "w1", "w2", "w3"}


# -- prediction ----------------------------------------------------------------


def numpy_ols(xs, ys):
    design = np.column_stack([np.ones(len(xs)), xs])
    coef = np.linalg.solve(design.T @ design, design.T @ np.asarray(ys))
    return float(coef[0]), float(coef[1])


def test_linear_series_recovered_exactly():
    series = [(T0 + timedelta(seconds=t), 0.5 + 0.01 * t) for t in range(5)]
    f = predict_trend(series, timedelta(seconds=3))
    assert f.forecast_score == pytest.approx(0.5 + 0.01 * 7, abs=1e-9)
    assert f.slope == pytest.approx(0.01, abs=1e-12)
    assert f.n == 5
    assert f.forecast_at == T0 + timedelta(seconds=7)


def test_constant_and_degenerate_series():
    f = predict_trend([(T0 + timedelta(hours=h), 0.7) for h in range(4)], timedelta(days=1))
    assert f.forecast_score == pytest.approx(0.7, abs=1e-12) and f.slope == 0
    with pytest.raises(InsufficientHistory):
        predict_trend([(T0, 0.5)], timedelta(hours=1))
    with pytest.raises(InsufficientHistory):
        predict_trend([(T0, 0.5), (T0, 0.6)], timedelta(hours=1))
    with pytest.raises(InsufficientHistory):
        predict_trend([], timedelta(hours=1))


def test_forecast_is_clamped():
    rising = [(T0 + timedelta(days=d), 0.2 * d) for d in range(5)]
    assert predict_trend(rising, timedelta(days=10)).forecast_score == 1.0


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(min_value=0, max_value=10**6), st.floats(min_value=0, max_value=1)), min_size=2, max_size=30, unique_by=lambda p: p[0]))
def test_ols_matches_numpy_normal_equations(points):
    series = [(T0 + timedelta(seconds=t), y) for t, y in points]
    f = predict_trend(series, timedelta(0))
    t0 = min(t for t, _ in points)
    intercept, slope = numpy_ols([t - t0 for t, _ in points], [y for _, y in points])
    assert f.slope == pytest.approx(slope, rel=1e-6, abs=1e-12)
    assert f.intercept == pytest.approx(intercept, rel=1e-6, abs=1e-7)


# -- execution phase -----------------------------------------------------------


def test_execute_cycle_matches_hand_rollup():
    m = two_leaf_model()
    plan = plan_phase(CTX, m, created_at=T0)
    report = execute_cycle(plan, m, [rec(0, "a/m", 0.8), rec(0, "b/m", 0.6)], T0 + timedelta(days=1))
    assert report.root_score == pytest.approx(0.74, abs=1e-15)
    assert report.predictions is None
    assert "predictions" not in report.detailed()
    assert report.verdict_summary["target-met"] == 1 and report.verdict_summary["accepted"] == 1


def test_execute_cycle_before_any_record_is_all_no_data():
    m = two_leaf_model()
    plan = plan_phase(CTX, m, created_at=T0)
    report = execute_cycle(plan, m, [rec(1, "a/m", 0.8)], T0)
    assert report.root_score is None
    assert report.verdict_summary["no-data"] == 2
    assert all(n.score is None for n in report.scored_tree.walk())
    assert len(report.recommendations) == 2


def test_latest_record_wins_and_future_is_ignored():
    m = two_leaf_model()
    plan = plan_phase(CTX, m, created_at=T0)
    records = [rec(0, "a/m", 0.1), rec(2, "a/m", 0.9), rec(1, "a/m", 0.5), rec(5, "a/m", 0.0), rec(1, "b/m", 0.5)]
    report = execute_cycle(plan, m, records, T0 + timedelta(days=3))
    a = next(r for r in report.metrics if r.metric_path == "a/m")
    assert a.indicator == 0.9
    assert [h[1] for h in a.history] == [0.1, 0.5, 0.9]
    assert a.dispersion.n == 3


def test_same_timestamp_later_arrival_wins():
    m = two_leaf_model()
    plan = plan_phase(CTX, m, created_at=T0)
    report = execute_cycle(plan, m, [rec(0, "a/m", 0.2), rec(0, "a/m", 0.3)], T0)
    assert report.metrics[0].indicator == 0.3


def test_rejected_metric_yields_recommendation():
    m = two_leaf_model()
    plan = plan_phase(CTX, m, created_at=T0)
    report = execute_cycle(plan, m, [rec(0, "a/m", 0.1), rec(0, "b/m", 0.3)], T0)
    assert report.recommendations[0].startswith("address a/m before gate")
    assert report.recommendations[1].startswith("improve b/m")


def test_prediction_purpose_forecasts_linear_root():
    m = two_leaf_model(purpose="prediction")
    plan = plan_phase(CTX, m, frequency="24h", created_at=T0)
    records = [rec(d, p, 0.5 + 0.01 * d) for d in range(5) for p in ("a/m", "b/m")]
    report = execute_cycle(plan, m, records, T0 + timedelta(days=4))
    p = report.predictions
    assert p["status"] == "ok" and p["n"] == 5
    assert p["forecast_score"] == pytest.approx(0.55, abs=1e-9)


def test_prediction_with_short_history_is_reported_not_raised():
    m = two_leaf_model(purpose="multi-purpose")
    plan = plan_phase(CTX, m, created_at=T0)
    report = execute_cycle(plan, m, [rec(0, "a/m", 0.5)], T0)
    assert report.predictions["status"] == "insufficient-history"


def test_operator_override_and_hash_check():
    m = two_leaf_model()
    plan = plan_phase(CTX, m, operator="min", created_at=T0)
    assert execute_cycle(plan, m, [rec(0, "a/m", 0.8), rec(0, "b/m", 0.6)], T0).root_score == 0.6
    other = two_leaf_model(operator="max")
    with pytest.raises(ModelHashMismatch):
        execute_cycle(plan, other, [], T0)
    with pytest.raises(PlanError):
        execute_cycle(plan.to_dict(), m, [], T0)


def test_reports_are_byte_identical(tmp_path):
    m = parse_qmdl((EXAMPLES / "ecu-2leaf.qmdl").read_text())
    plan = plan_phase(CTX, m, created_at=T0)
    store = RecordStore(tmp_path / "measurements" / "records.jsonl")
    ingest((EXAMPLES / "ecu-2leaf.records.jsonl").read_text().splitlines(), store, m)
    as_of = parse_timestamp("2026-03-05T00:00:00Z")
    first = write_report(execute_cycle(plan, m, store, as_of), tmp_path)
    blobs = {p.name: p.read_bytes() for p in first.iterdir()}
    second = write_report(execute_cycle(plan, m, store, as_of), tmp_path)
    assert first == second and first.name == "20260305T000000Z"
    assert {p.name: p.read_bytes() for p in second.iterdir()} == blobs
    assert set(blobs) == {"dashboard.json", "summary.md", "detailed.json"}
    detailed = json.loads(blobs["detailed.json"])
    assert detailed["root_score"] == pytest.approx(0.74, abs=1e-12)
    assert detailed["metrics"][0]["selected_record"]["source"] == "bench-rig"
