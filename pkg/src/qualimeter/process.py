"""Three-phase measurement process: initial, planning and execution.

* :func:`init_phase` merges objectives, context and lessons learned into a
  :class:`MeasurementContext`.
* :func:`plan_phase` binds a context to a rule-conforming model and produces
  an :class:`EvaluationPlan` whose id is a hash of its content.
* :func:`ingest` appends measurement records to an append-only JSON-lines
  store; :func:`execute_cycle` evaluates the store as of a point in time and
  returns an :class:`EvaluationReport` renderable as dashboard data, an
  analyst summary and detailed results.

Scheduling is left to the caller: a cycle is always evaluated "as of" an
explicit timestamp, which keeps reports reproducible.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .aggregation import OPERATORS, Dispersion, ScoredNode, aggregate, dispersion, score_tree
from .errors import (
    DuplicateObjectiveId,
    InsufficientHistory,
    InvalidFrequency,
    MetricError,
    ModelHashMismatch,
    ModelRuleViolations,
    NoObjectives,
    PlanError,
    StoreUnwritable,
    UnsupportedOrganization,
)
from .metrics import VerdictLevel, evaluate_thresholds, normalize_value
from .model import Organization, QualityModel, join_path
from .qmdl import format_number, serialize_qmdl
from .rules import Rule, Severity, check, default_ruleset, has_errors

try:
    import fcntl
except ImportError:  # non-POSIX
    fcntl = None

__all__ = [
    "Objective",
    "MeasurementContext",
    "EvaluationPlan",
    "MeasurementRecord",
    "Diagnostic",
    "IngestResult",
    "RecordStore",
    "TrendForecast",
    "EvaluationReport",
    "ISO25040_ACTIVITIES",
    "PHASE_TASKS",
    "init_phase",
    "plan_phase",
    "ingest",
    "execute_cycle",
    "predict_trend",
    "iso25040_coverage",
    "model_hash",
    "parse_duration",
    "parse_timestamp",
    "format_timestamp",
    "write_report",
]

# -- phase structure ---------------------------------------------------------

PHASE_TASKS: dict[str, tuple[str, ...]] = {
    "initial": ("identify-objectives", "define-context", "process-improvement"),
    "planning": (
        "specify-quality-model",
        "plan-collection-and-storage",
        "plan-analysis-and-criteria",
        "synthesize-evaluation-plan",
    ),
    "execution": ("collect-store-analyze", "report-and-communicate"),
}

ISO25040_ACTIVITIES = (
    "establish-requirements",
    "specify-evaluation",
    "design-evaluation",
    "execute-evaluation",
    "conclude-evaluation",
)

# phase of this process that contains each ISO/IEC 25040 activity
_ACTIVITY_PHASE = {
    "establish-requirements": "initial",
    "specify-evaluation": "planning",
    "design-evaluation": "planning",
    "execute-evaluation": "execution",
    "conclude-evaluation": "execution",
}

_DEFAULT_ISO_MAP = {
    "initial/identify-objectives": "establish-requirements",
    "initial/define-context": "establish-requirements",
    "planning/specify-quality-model": "specify-evaluation",
    "planning/plan-collection-and-storage": "design-evaluation",
    "planning/plan-analysis-and-criteria": "design-evaluation",
    "planning/synthesize-evaluation-plan": "design-evaluation",
    "execution/collect-store-analyze": "execute-evaluation",
    "execution/report-and-communicate": "conclude-evaluation",
}

# -- time helpers ------------------------------------------------------------

_DURATION_RE = re.compile(
    r"(?:(?P<w>\d+(?:\.\d+)?)w)?(?:(?P<d>\d+(?:\.\d+)?)d)?(?:(?P<h>\d+(?:\.\d+)?)h)?"
    r"(?:(?P<m>\d+(?:\.\d+)?)m)?(?:(?P<s>\d+(?:\.\d+)?)s)?"
)
_UNIT_SECONDS = {"w": 604800, "d": 86400, "h": 3600, "m": 60, "s": 1}


def parse_duration(text: str) -> timedelta:
    """Parse ``24h``, ``1h30m``, ``7d``, ``2w``, ``90s``; must be positive."""
    text = text.strip()
    m = _DURATION_RE.fullmatch(text)
    if not text or m is None or not any(m.groupdict().values()):
        raise InvalidFrequency(f"invalid duration {text!r} (examples: 24h, 1h30m, 7d)")
    seconds = sum(float(v) * _UNIT_SECONDS[k] for k, v in m.groupdict().items() if v)
    if seconds <= 0:
        raise InvalidFrequency(f"duration {text!r} must be positive")
    return timedelta(seconds=seconds)


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp with an explicit offset; returns aware UTC."""
    if not isinstance(text, str):
        raise ValueError(f"timestamp must be a string, got {type(text).__name__}")
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def report_dir_name(dt: datetime) -> str:
    # filesystem-safe basic ISO form used for report directory names
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y%m%dT%H%M%S") + (f".{dt.microsecond:06d}" if dt.microsecond else "") + "Z"


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def model_hash(model: QualityModel) -> str:
    """Lowercase hex SHA-256 of the canonical QMDL serialization."""
    return _sha256(serialize_qmdl(model))


# -- initial phase -----------------------------------------------------------


@dataclass(frozen=True)
class Objective:
    id: str
    text: str
    linked_requirement: str = ""


@dataclass(frozen=True)
class MeasurementContext:
    objectives: tuple[Objective, ...]
    scope_boundaries: str = ""
    dependencies: tuple[str, ...] = ()
    environment: str = ""
    improvement_notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "objectives": [dataclasses.asdict(o) for o in self.objectives],
            "scope_boundaries": self.scope_boundaries,
            "dependencies": list(self.dependencies),
            "environment": self.environment,
            "improvement_notes": list(self.improvement_notes),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> MeasurementContext:
        try:
            objectives = [Objective(**o) for o in data["objectives"]]
        except (KeyError, TypeError) as exc:
            raise PlanError(f"malformed context: {exc}") from None
        return init_phase(
            objectives,
            scope_boundaries=data.get("scope_boundaries", ""),
            dependencies=data.get("dependencies", ()),
            environment=data.get("environment", ""),
            lessons=data.get("improvement_notes", ()),
        )


def init_phase(
    requirements: Iterable[Objective | Mapping],
    scope_boundaries: str = "",
    dependencies: Iterable[str] = (),
    environment: str = "",
    lessons: Iterable[str] = (),
) -> MeasurementContext:
    """Merge objectives, context definition and lessons learned into one context.

    ``lessons`` may be empty on a first iteration.
    """
    objectives = tuple(o if isinstance(o, Objective) else Objective(**o) for o in requirements)
    if not objectives:
        raise NoObjectives("at least one measurement objective is required")
    seen: set[str] = set()
    for o in objectives:
        if o.id in seen:
            raise DuplicateObjectiveId(f"duplicate objective id {o.id!r}")
        seen.add(o.id)
    return MeasurementContext(
        objectives=objectives,
        scope_boundaries=scope_boundaries,
        dependencies=tuple(dependencies),
        environment=environment,
        improvement_notes=tuple(lessons),
    )


def parse_objectives_file(text: str) -> MeasurementContext:
    """Read an objectives file into a context.

    Lines are ``key: value`` with keys ``objective`` (``id | text | requirement``,
    requirement optional), ``scope``, ``environment``, ``dependency`` and
    ``lesson``; ``#`` starts a comment.  Repeated ``scope``/``environment``
    lines are joined with newlines.
    """
    objectives, deps, lessons = [], [], []
    scope, env = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key, value = key.strip().lower(), value.strip()
        if not sep:
            raise PlanError(f"line {lineno}: expected 'key: value'")
        if key == "objective":
            parts = [p.strip() for p in value.split("|")]
            if len(parts) < 2 or not parts[0] or len(parts) > 3:
                raise PlanError(f"line {lineno}: expected 'objective: id | text | requirement'")
            objectives.append(Objective(parts[0], parts[1], parts[2] if len(parts) == 3 else ""))
        elif key == "scope":
            scope.append(value)
        elif key == "environment":
            env.append(value)
        elif key == "dependency":
            deps.append(value)
        elif key == "lesson":
            lessons.append(value)
        else:
            raise PlanError(f"line {lineno}: unknown key {key!r}")
    return init_phase(objectives, "\n".join(scope), deps, "\n".join(env), lessons)


# -- planning phase ----------------------------------------------------------


@dataclass(frozen=True)
class EvaluationPlan:
    plan_id: str
    context: MeasurementContext
    model_ref: dict
    collection: dict
    analysis: dict
    lifecycle_stage: str
    iso25040_map: dict
    created_at: str

    @property
    def model_hash(self) -> str:
        return self.model_ref["hash"]

    @property
    def frequency(self) -> timedelta:
        return timedelta(seconds=self.collection["frequency_seconds"])

    def ruleset(self) -> list[Rule]:
        return [
            Rule(r["id"], r["name"], Severity(r["severity"]), dict(r["params"]))
            for r in self.analysis.get("ruleset", [])
        ] or default_ruleset()

    def to_dict(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "created_at": self.created_at,
            "lifecycle_stage": self.lifecycle_stage,
            "context": self.context.to_dict(),
            "model_ref": dict(self.model_ref),
            "collection": dict(self.collection),
            "analysis": dict(self.analysis),
            "iso25040_map": dict(self.iso25040_map),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> EvaluationPlan:
        try:
            return cls(
                plan_id=data["plan_id"],
                context=MeasurementContext.from_dict(data["context"]),
                model_ref=dict(data["model_ref"]),
                collection=dict(data["collection"]),
                analysis=dict(data["analysis"]),
                lifecycle_stage=data["lifecycle_stage"],
                iso25040_map=dict(data["iso25040_map"]),
                created_at=data["created_at"],
            )
        except (KeyError, TypeError) as exc:
            raise PlanError(f"malformed plan: missing or invalid field {exc}") from None


def _plan_id(body: dict) -> str:
    return "plan-" + _sha256(_canonical_json(body))[:16]


def plan_phase(
    context: MeasurementContext,
    model: QualityModel,
    lifecycle_stage: str = "development",
    frequency: str | timedelta = "24h",
    storage_path: str = "measurements/records.jsonl",
    model_path: str | None = None,
    operator: str | None = None,
    criteria_notes: Sequence[str] = (),
    ruleset: Sequence[Rule] | None = None,
    created_at: datetime | None = None,
) -> EvaluationPlan:
    """Synthesize the evaluation plan.

    The model must have no Error-severity rule violations.  ``plan_id`` is
    derived from the plan content (everything except ``created_at``).
    """
    if not isinstance(context, MeasurementContext):
        raise PlanError("plan_phase requires a MeasurementContext from init_phase")
    ruleset = list(ruleset) if ruleset is not None else default_ruleset()
    if model.organization is not Organization.HIERARCHICAL:
        raise UnsupportedOrganization(f"model {model.id!r} is not hierarchical and cannot be evaluated")
    violations = check(model, ruleset)
    if has_errors(violations):
        raise ModelRuleViolations(violations)
    if isinstance(frequency, timedelta):
        if frequency.total_seconds() <= 0:
            raise InvalidFrequency("collection frequency must be positive")
        freq_text, freq_seconds = f"{frequency.total_seconds():g}s", frequency.total_seconds()
    else:
        freq_text, freq_seconds = frequency, parse_duration(frequency).total_seconds()
    if operator is not None and operator not in OPERATORS:
        raise PlanError(f"unknown aggregation operator override {operator!r}")

    body = {
        "lifecycle_stage": lifecycle_stage,
        "context": context.to_dict(),
        "model_ref": {
            "id": model.id,
            "hash": model_hash(model),
            "path": model_path or f"models/{model.id}.qmdl",
        },
        "collection": {
            "frequency": freq_text,
            "frequency_seconds": freq_seconds,
            "storage_path": storage_path,
        },
        "analysis": {
            "operator": operator,
            "criteria_notes": list(criteria_notes),
            "ruleset": [
                {"id": r.id, "name": r.name, "severity": r.severity.value, "params": dict(r.params)}
                for r in ruleset
            ],
            "warnings": [v.to_dict() for v in violations],
        },
        "iso25040_map": dict(_DEFAULT_ISO_MAP),
    }
    stamp = format_timestamp(created_at or datetime.now(timezone.utc))
    return EvaluationPlan.from_dict({"plan_id": _plan_id(body), "created_at": stamp, **body})


def iso25040_coverage(plan: EvaluationPlan | Mapping[str, str]) -> set[str]:
    """ISO/IEC 25040 activities not covered by a task of the matching phase.

    An activity counts as covered when the plan maps at least one known task
    of the phase that contains it to that activity.  An empty result means the
    standard's process is fully contained in the plan's phase structure.
    """
    mapping = plan.iso25040_map if isinstance(plan, EvaluationPlan) else plan
    covered = set()
    for task, activity in mapping.items():
        phase, _, name = task.partition("/")
        if name in PHASE_TASKS.get(phase, ()) and _ACTIVITY_PHASE.get(activity) == phase:
            covered.add(activity)
    return set(ISO25040_ACTIVITIES) - covered


# -- records & store ---------------------------------------------------------


@dataclass(frozen=True)
class MeasurementRecord:
    timestamp: datetime
    metric_path: str
    raw_value: float
    source: str = "unknown"

    def to_json(self) -> str:
        return json.dumps(
            {"ts": format_timestamp(self.timestamp), "metric": self.metric_path,
             "value": self.raw_value, "source": self.source},
            separators=(",", ":"),
            ensure_ascii=False,
        )


@dataclass(frozen=True)
class Diagnostic:
    line: int
    code: str
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.code}: {self.message}"

    def to_dict(self) -> dict:
        return {"line": self.line, "code": self.code, "message": self.message}


class RecordRejected(Exception):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


def parse_record(line: str, model: QualityModel | None = None) -> MeasurementRecord:
    """Decode one JSON record line; raises RecordRejected with a diagnostic code."""
    try:
        obj = json.loads(line)
    except ValueError as exc:
        raise RecordRejected("BadRecord", f"not valid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise RecordRejected("BadRecord", "record must be a JSON object")
    missing = [k for k in ("ts", "metric", "value") if k not in obj]
    if missing:
        raise RecordRejected("BadRecord", f"missing key(s): {', '.join(missing)}")
    try:
        ts = parse_timestamp(obj["ts"])
    except (ValueError, TypeError) as exc:
        raise RecordRejected("BadTimestamp", f"invalid timestamp {obj['ts']!r}: {exc}") from None
    metric = obj["metric"]
    if not isinstance(metric, str):
        raise RecordRejected("UnknownMetricPath", f"metric must be a string, got {metric!r}")
    if model is not None:
        try:
            model.resolve_metric(metric)
        except KeyError:
            raise RecordRejected("UnknownMetricPath", f"{metric!r} does not name a metric of model {model.id!r}") from None
    value = obj["value"]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise RecordRejected("NonNumericValue", f"value {value!r} is not a finite number")
    source = obj.get("source", "unknown")
    if not isinstance(source, str):
        raise RecordRejected("BadRecord", f"source must be a string, got {source!r}")
    return MeasurementRecord(ts, metric, float(value), source)


class RecordStore:
    """Append-only JSON-lines store; one writer at a time via an advisory lock."""

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)

    def append(self, records: Sequence[MeasurementRecord]) -> int:
        if not records:
            return 0
        payload = "".join(r.to_json() + "\n" for r in records).encode("utf-8")
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "ab") as fh:
                if fcntl is not None:
                    fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
                try:
                    fh.seek(0, os.SEEK_END)
                    if fh.tell() > 0 and not self._ends_with_newline():
                        fh.write(b"\n")
                    fh.write(payload)
                    fh.flush()
                    os.fsync(fh.fileno())
                finally:
                    if fcntl is not None:
                        fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
        except OSError as exc:
            raise StoreUnwritable(f"cannot append to {self.path}: {exc}") from exc
        return len(records)

    def _ends_with_newline(self) -> bool:
        with open(self.path, "rb") as fh:
            fh.seek(-1, os.SEEK_END)
            return fh.read(1) == b"\n"

    def snapshot(self) -> tuple[list[MeasurementRecord], list[Diagnostic]]:
        """Records present when the call starts; a trailing partial line is ignored."""
        if not self.path.exists():
            return [], []
        try:
            with open(self.path, "rb") as fh:
                size = os.fstat(fh.fileno()).st_size
                data = fh.read(size)
        except OSError as exc:
            raise StoreUnwritable(f"cannot read {self.path}: {exc}") from exc
        if not data.endswith(b"\n"):
            data = data[: data.rfind(b"\n") + 1]
        records, diags = [], []
        for lineno, raw in enumerate(data.decode("utf-8", errors="replace").splitlines(), 1):
            if not raw.strip():
                continue
            try:
                records.append(parse_record(raw))
            except RecordRejected as exc:
                diags.append(Diagnostic(lineno, exc.code, str(exc)))
        return records, diags


@dataclass(frozen=True)
class IngestResult:
    appended: int
    diagnostics: tuple[Diagnostic, ...] = ()


def ingest(lines: Iterable[str], store: RecordStore, model: QualityModel) -> IngestResult:
    """Validate record lines and append the well-formed ones in arrival order.

    Malformed records are rejected individually with a line-numbered
    diagnostic; they never block the others.
    """
    good: list[MeasurementRecord] = []
    diags: list[Diagnostic] = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            good.append(parse_record(line, model))
        except RecordRejected as exc:
            diags.append(Diagnostic(lineno, exc.code, str(exc)))
    return IngestResult(store.append(good), tuple(diags))


# -- prediction --------------------------------------------------------------


@dataclass(frozen=True)
class TrendForecast:
    forecast_score: float
    slope: float
    intercept: float
    n: int
    forecast_at: datetime

    def to_dict(self) -> dict:
        return {
            "forecast_score": self.forecast_score,
            "slope_per_second": self.slope,
            "intercept": self.intercept,
            "n": self.n,
            "forecast_at": format_timestamp(self.forecast_at),
        }


def predict_trend(series: Sequence[tuple[datetime, float]], horizon: timedelta) -> TrendForecast:
    """Least-squares line through (seconds since first point, score).

    The forecast is read at the last timestamp plus ``horizon`` and clamped to
    [0, 1].  Needs at least two distinct timestamps.
    """
    if not series:
        raise InsufficientHistory("no points to fit")
    t0 = min(t for t, _ in series)
    xs = [(t - t0).total_seconds() for t, _ in series]
    ys = [float(y) for _, y in series]
    if len(set(xs)) < 2:
        raise InsufficientHistory(f"need at least 2 distinct timestamps, got {len(set(xs))}")
    n = len(xs)
    x_mean = math.fsum(xs) / n
    y_mean = math.fsum(ys) / n
    sxx = math.fsum((x - x_mean) ** 2 for x in xs)
    sxy = math.fsum((x - x_mean) * (y - y_mean) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    x_last = max(xs)
    target = x_last + horizon.total_seconds()
    forecast = intercept + slope * target
    return TrendForecast(
        forecast_score=min(1.0, max(0.0, forecast)),
        slope=slope,
        intercept=intercept,
        n=n,
        forecast_at=t0 + timedelta(seconds=target),
    )


# -- execution phase ---------------------------------------------------------


@dataclass(frozen=True)
class MetricResult:
    metric_path: str
    leaf_path: str
    indicator: float | None
    verdict: str | None
    vs_reference: str | None
    selected: MeasurementRecord | None
    history: tuple[tuple[MeasurementRecord, float], ...]
    dispersion: Dispersion | None
    thresholds: dict | None


@dataclass(frozen=True)
class EvaluationReport:
    plan_id: str
    model_id: str
    model_hash: str
    as_of: datetime
    scored_tree: ScoredNode
    verdict_summary: dict
    metrics: tuple[MetricResult, ...]
    predictions: dict | None
    recommendations: tuple[str, ...]
    diagnostics: tuple[Diagnostic, ...] = ()
    warnings: tuple[dict, ...] = field(default=())

    @property
    def root_score(self) -> float | None:
        return self.scored_tree.score

    def dashboard(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "model_id": self.model_id,
            "model_hash": self.model_hash,
            "as_of": format_timestamp(self.as_of),
            "verdict_summary": dict(self.verdict_summary),
            "tree": _dashboard_node(self.scored_tree),
        }

    def detailed(self) -> dict:
        out = {
            "plan_id": self.plan_id,
            "model_id": self.model_id,
            "model_hash": self.model_hash,
            "as_of": format_timestamp(self.as_of),
            "root_score": self.root_score,
            "verdict_summary": dict(self.verdict_summary),
            "nodes": [
                {"path": n.path or "@root", "score": n.score, "weight": n.weight,
                 "contributing_count": n.contributing_count,
                 "verdict": n.verdict.level.label if n.verdict else None}
                for n in self.scored_tree.walk()
            ],
            "metrics": [_metric_detail(m) for m in self.metrics],
            "recommendations": list(self.recommendations),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "rule_warnings": list(self.warnings),
        }
        if self.predictions is not None:
            out["predictions"] = self.predictions
        return out

    def summary_markdown(self) -> str:
        lines = [
            f"# Quality evaluation: {self.model_id}",
            "",
            f"- plan: `{self.plan_id}`",
            f"- model hash: `{self.model_hash}`",
            f"- as of: {format_timestamp(self.as_of)}",
            f"- root score: {_fmt(self.root_score)}",
            "",
            "## Verdicts",
            "",
            "| verdict | count |",
            "|---|---|",
        ]
        lines += [f"| {k} | {v} |" for k, v in self.verdict_summary.items()]
        lines += ["", "## Characteristics", "", "| path | score | verdict |", "|---|---|---|"]
        for n in self.scored_tree.walk():
            verdict = n.verdict.level.label if n.verdict else ""
            lines.append(f"| {n.path or n.name} | {_fmt(n.score)} | {verdict} |")
        if self.predictions is not None:
            lines += ["", "## Predictions", ""]
            if self.predictions.get("status") == "ok":
                p = self.predictions
                lines.append(
                    f"- root score forecast at {p['forecast_at']}: {_fmt(p['forecast_score'])} "
                    f"(slope {p['slope_per_second']:.3e}/s over {p['n']} points)"
                )
            else:
                lines.append(f"- {self.predictions['status']}: {self.predictions.get('reason', '')}")
        lines += ["", "## Recommendations", ""]
        lines += [f"- {r}" for r in self.recommendations] or ["- none"]
        if self.diagnostics:
            lines += ["", "## Diagnostics", ""]
            lines += [f"- {d}" for d in self.diagnostics]
        return "\n".join(lines) + "\n"

    def formats(self) -> dict[str, str]:
        """The three rendered targets keyed by file name."""
        return {
            "dashboard.json": _dump(self.dashboard()),
            "summary.md": self.summary_markdown(),
            "detailed.json": _dump(self.detailed()),
        }


def _fmt(x: float | None) -> str:
    return "no-data" if x is None else f"{x:.9f}"


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _dashboard_node(node: ScoredNode) -> dict:
    return {
        "name": node.name,
        "score": node.score,
        "verdict": node.verdict.level.label if node.verdict else ("no-data" if node.score is None else None),
        "children": [_dashboard_node(c) for c in node.children],
    }


def _record_dict(r: MeasurementRecord) -> dict:
    return {"ts": format_timestamp(r.timestamp), "value": r.raw_value, "source": r.source}


def _metric_detail(m: MetricResult) -> dict:
    return {
        "metric": m.metric_path,
        "leaf": m.leaf_path,
        "indicator": m.indicator,
        "verdict": m.verdict,
        "vs_reference": m.vs_reference,
        "thresholds": m.thresholds,
        "selected_record": _record_dict(m.selected) if m.selected else None,
        "history": [{**_record_dict(r), "indicator": ind} for r, ind in m.history],
        "dispersion": dataclasses.asdict(m.dispersion) if m.dispersion else None,
    }


def _latest_indicators(model: QualityModel, latest: Mapping[str, MeasurementRecord]):
    """Leaf and metric indicators from the latest record of each metric."""
    metric_ind: dict[str, float] = {}
    leaf_ind: dict[str, float] = {}
    for leaf in model.leaf_paths():
        node = model.node(leaf)
        values = []
        for m in node.metrics:
            mp = join_path(leaf, m.name)
            rec = latest.get(mp)
            if rec is None:
                continue
            try:
                ind = normalize_value(m, rec.raw_value)
            except MetricError:
                continue
            metric_ind[mp] = ind
            values.append(ind)
        if values:
            leaf_ind[leaf] = aggregate(values, [1.0] * len(values), model.aggregation_operator)
    return leaf_ind, metric_ind


def execute_cycle(
    plan: EvaluationPlan,
    model: QualityModel,
    store: RecordStore | Sequence[MeasurementRecord],
    as_of: datetime,
) -> EvaluationReport:
    """Evaluate every metric from its latest record at or before ``as_of``.

    Produces the scored tree with verdicts, dispersion of each metric's
    history, a root-score forecast when the model's purpose includes
    prediction, and rule-generated recommendations.  Missing data yields
    NoData markers rather than an error.
    """
    if not isinstance(plan, EvaluationPlan):
        raise PlanError("execute_cycle requires an EvaluationPlan from plan_phase")
    actual = model_hash(model)
    if actual != plan.model_hash:
        raise ModelHashMismatch(f"model hash {actual} does not match plan {plan.plan_id} ({plan.model_hash})")
    if plan.analysis.get("operator"):
        model = dataclasses.replace(model, aggregation_operator=plan.analysis["operator"])

    ruleset = plan.ruleset()
    violations = check(model, ruleset)
    if has_errors(violations):
        raise ModelRuleViolations(violations)
    if model.organization is not Organization.HIERARCHICAL:
        raise UnsupportedOrganization(f"model {model.id!r} is not hierarchical")

    diagnostics: list[Diagnostic] = []
    if isinstance(store, RecordStore):
        records, diags = store.snapshot()
        diagnostics.extend(diags)
    else:
        records = list(store)
    as_of = as_of.astimezone(timezone.utc)

    known = set(model.metric_paths())
    usable = [r for r in records if r.timestamp <= as_of and r.metric_path in known]
    # stable sort: equal timestamps keep arrival order, so the later arrival wins
    usable.sort(key=lambda r: r.timestamp)

    latest: dict[str, MeasurementRecord] = {}
    for r in usable:
        latest[r.metric_path] = r
    leaf_ind, metric_ind = _latest_indicators(model, latest)
    tree = score_tree(model, leaf_ind, metric_ind)

    metric_results = []
    summary = {lvl.label: 0 for lvl in VerdictLevel}
    summary["no-data"] = 0
    summary["no-threshold"] = 0
    for leaf in model.leaf_paths():
        node = model.node(leaf)
        for m in node.metrics:
            mp = join_path(leaf, m.name)
            history = []
            for r in usable:
                if r.metric_path == mp:
                    try:
                        history.append((r, normalize_value(m, r.raw_value)))
                    except MetricError as exc:
                        diagnostics.append(Diagnostic(0, "NominalNormalization", f"{mp}: {exc}"))
                        break
            ind = metric_ind.get(mp)
            verdict = vs_ref = None
            if ind is None:
                summary["no-data"] += 1
            elif m.thresholds is None:
                summary["no-threshold"] += 1
            else:
                v = evaluate_thresholds(m.thresholds, ind)
                verdict = v.level.label
                vs_ref = v.vs_reference.value if v.vs_reference else None
                summary[verdict] += 1
            metric_results.append(
                MetricResult(
                    metric_path=mp,
                    leaf_path=leaf,
                    indicator=ind,
                    verdict=verdict,
                    vs_reference=vs_ref,
                    selected=latest.get(mp) if ind is not None else None,
                    history=tuple(history),
                    dispersion=dispersion([i for _, i in history]) if history else None,
                    thresholds=dataclasses.asdict(m.thresholds) if m.thresholds else None,
                )
            )

    predictions = None
    if "predict" in model.capabilities:
        predictions = _predict(model, usable, plan.frequency)

    return EvaluationReport(
        plan_id=plan.plan_id,
        model_id=model.id,
        model_hash=plan.model_hash,
        as_of=as_of,
        scored_tree=tree,
        verdict_summary=summary,
        metrics=tuple(metric_results),
        predictions=predictions,
        recommendations=tuple(_recommend(tree, metric_results, predictions)),
        diagnostics=tuple(diagnostics),
        warnings=tuple(v.to_dict() for v in violations),
    )


def root_score_series(model: QualityModel, records: Sequence[MeasurementRecord]) -> list[tuple[datetime, float]]:
    """Root score after each distinct timestamp, replaying records in time order."""
    latest: dict[str, MeasurementRecord] = {}
    series = []
    i = 0
    while i < len(records):
        ts = records[i].timestamp
        while i < len(records) and records[i].timestamp == ts:
            latest[records[i].metric_path] = records[i]
            i += 1
        leaf_ind, metric_ind = _latest_indicators(model, latest)
        score = score_tree(model, leaf_ind, metric_ind).score
        if score is not None:
            series.append((ts, score))
    return series


def _predict(model: QualityModel, usable: Sequence[MeasurementRecord], horizon: timedelta) -> dict:
    series = root_score_series(model, usable)
    try:
        forecast = predict_trend(series, horizon)
    except InsufficientHistory as exc:
        return {"status": "insufficient-history", "reason": str(exc), "n": len(series)}
    return {"status": "ok", "horizon_seconds": horizon.total_seconds(), **forecast.to_dict()}


def _recommend(tree: ScoredNode, metrics: Sequence[MetricResult], predictions: dict | None) -> list[str]:
    out = []
    for m in metrics:
        if m.indicator is None:
            out.append(f"collect data for {m.metric_path}: no measurement at or before the evaluation time")
        elif m.verdict == "rejected":
            out.append(
                f"address {m.metric_path} before gate: indicator {m.indicator:.3f} "
                f"is at or below reject {format_number(m.thresholds['reject'])}"
            )
        elif m.verdict == "marginal":
            out.append(
                f"improve {m.metric_path}: indicator {m.indicator:.3f} "
                f"is below accept {format_number(m.thresholds['accept'])}"
            )
        if m.vs_reference == "below":
            out.append(f"{m.metric_path} is below the reference level {format_number(m.thresholds['reference'])}")
    if predictions and predictions.get("status") == "ok" and tree.score is not None:
        if predictions["forecast_score"] < tree.score:
            out.append(
                f"root score is trending down: forecast {predictions['forecast_score']:.3f} "
                f"at {predictions['forecast_at']} versus {tree.score:.3f} now"
            )
    return out


def write_report(report: EvaluationReport, project_dir: Path | str) -> Path:
    """Write the three report artifacts under ``reports/<as_of>/``."""
    out_dir = Path(project_dir) / "reports" / report_dir_name(report.as_of)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in report.formats().items():
        (out_dir / name).write_text(text, encoding="utf-8")
    return out_dir
