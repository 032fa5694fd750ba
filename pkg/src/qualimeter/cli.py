"""``qualimeter`` command line.

Exit codes: 0 success, 1 validation errors (parse errors, rule errors,
threshold order, rejected records), 2 usage errors, 3 I/O errors.
Machine output goes to stdout, diagnostics to stderr.  The project
directory is taken from ``QUALIMETER_PROJECT`` (default: current directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime
from pathlib import Path

from .diversity import MODES, distance_matrix, parse_population, polymorphism_degree
from .errors import QualimeterError, StoreUnwritable
from .model import QualityModel
from .process import (
    EvaluationPlan,
    MeasurementContext,
    Objective,
    RecordStore,
    RecordRejected,
    report_dir_name,
    execute_cycle,
    init_phase,
    ingest,
    model_hash,
    parse_objectives_file,
    parse_record,
    parse_timestamp,
    plan_phase,
    write_report,
)
from .qmdl import parse_qmdl, serialize_qmdl
from .rules import Severity, apply_overrides, check, extended_ruleset, load_overrides

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


def _project_dir() -> Path:
    return Path(os.environ.get("QUALIMETER_PROJECT", "."))


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_model(path: str) -> QualityModel:
    return parse_qmdl(Path(path).read_bytes())


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def _as_of(text: str) -> datetime:
    try:
        return parse_timestamp(text)
    except ValueError as exc:
        raise UsageError(f"--as-of: {exc}") from None


def _ruleset(path: str | None):
    ruleset = extended_ruleset()
    if path:
        ruleset = apply_overrides(ruleset, load_overrides(_read(path)))
    return ruleset


# -- model tools --------------------------------------------------------------


def cmd_validate(args) -> int:
    model = _load_model(args.model)
    violations = check(model, _ruleset(args.ruleset))
    errors = sum(v.severity is Severity.ERROR for v in violations)
    warnings = len(violations) - errors
    if args.format == "json":
        _emit_json({
            "model": model.id,
            "ok": errors == 0,
            "errors": errors,
            "warnings": warnings,
            "violations": [v.to_dict() for v in violations],
        })
    else:
        for v in violations:
            print(f"{v.rule_id} {v.severity.value} {v.path}: {v.message}")
        print(f"{model.id}: {errors} errors, {warnings} warnings")
    return EXIT_VALIDATION if errors else EXIT_OK


def cmd_serialize(args) -> int:
    sys.stdout.write(serialize_qmdl(_load_model(args.model)))
    return EXIT_OK


def _read_records(path: str, model: QualityModel):
    records, diags = [], []
    for lineno, line in enumerate(_read(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(parse_record(line, model))
        except RecordRejected as exc:
            diags.append(f"{path}:{lineno}: {exc.code}: {exc}")
    return records, diags


def cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    as_of = _as_of(args.as_of)
    records, diags = _read_records(args.records, model)
    for d in diags:
        print(d, file=sys.stderr)
    context = init_phase([Objective("adhoc", f"ad-hoc evaluation of {model.id}")])
    plan = plan_phase(context, model, model_path=args.model, created_at=as_of)
    report = execute_cycle(plan, model, records, as_of)
    if args.format == "md":
        sys.stdout.write(report.summary_markdown())
    else:
        _emit_json({**report.dashboard(), "diagnostics": diags})
    return EXIT_OK


def cmd_diversity(args) -> int:
    base = Path(args.population).parent
    pop = parse_population(_read(args.population), base)
    pi = polymorphism_degree(pop, args.mode)
    matrix = distance_matrix([m.model for m in pop.members], args.mode)
    if args.format == "json":
        _emit_json({
            "pi": pi,
            "mode": args.mode,
            "members": [{"id": m.model_id, "model": m.model.id, "frequency": m.frequency} for m in pop.members],
            "distances": matrix,
        })
    else:
        print(f"pi = {pi:.9f}")
        print(f"mode = {args.mode}")
        for i, a in enumerate(pop.members):
            for j in range(i + 1, len(pop.members)):
                b = pop.members[j]
                print(f"d({a.model_id}, {b.model_id}) = {matrix[i][j]:.9f}")
    return EXIT_OK


# -- process phases ------------------------------------------------------------


def cmd_init(args) -> int:
    context = parse_objectives_file(_read(args.objectives))
    Path(args.out).write_text(json.dumps(context.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"context with {len(context.objectives)} objective(s) written to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_plan(args) -> int:
    context = MeasurementContext.from_dict(json.loads(_read(args.context)))
    model = _load_model(args.model)
    project = _project_dir()
    rel_model = f"models/{model.id}.qmdl"
    ruleset = _ruleset(args.ruleset) if args.ruleset else None
    plan = plan_phase(
        context,
        model,
        lifecycle_stage=args.lifecycle_stage,
        frequency=args.frequency,
        model_path=rel_model,
        operator=args.operator,
        ruleset=ruleset,
    )
    (project / "models").mkdir(parents=True, exist_ok=True)
    (project / rel_model).write_text(serialize_qmdl(model), encoding="utf-8")
    Path(args.out).write_text(plan.to_json(), encoding="utf-8")
    print(plan.plan_id)
    return EXIT_OK


def _load_plan(path: str) -> tuple[EvaluationPlan, QualityModel, Path]:
    plan = EvaluationPlan.from_dict(json.loads(_read(path)))
    project = _project_dir()
    model = _load_model(str(project / plan.model_ref["path"]))
    return plan, model, project


def cmd_ingest(args) -> int:
    plan, model, project = _load_plan(args.plan)
    if model_hash(model) != plan.model_hash:
        print(f"error: model file does not match plan {plan.plan_id}", file=sys.stderr)
        return EXIT_VALIDATION
    store = RecordStore(project / plan.collection["storage_path"])
    result = ingest(_read(args.records).splitlines(), store, model)
    for d in result.diagnostics:
        print(f"{args.records}:{d.line}: {d.code}: {d.message}", file=sys.stderr)
    if args.format == "json":
        _emit_json({"appended": result.appended, "diagnostics": [d.to_dict() for d in result.diagnostics]})
    else:
        print(f"appended {result.appended} record(s), rejected {len(result.diagnostics)}")
    return EXIT_VALIDATION if result.diagnostics else EXIT_OK


def cmd_run(args) -> int:
    plan, model, project = _load_plan(args.plan)
    store = RecordStore(project / plan.collection["storage_path"])
    report = execute_cycle(plan, model, store, _as_of(args.as_of))
    out_dir = write_report(report, project)
    print(f"report written to {out_dir}", file=sys.stderr)
    if args.format == "json":
        _emit_json(report.dashboard())
    else:
        sys.stdout.write(report.summary_markdown())
    return EXIT_OK


def _report_dirs(project: Path, plan_id: str) -> list[tuple[datetime, Path]]:
    root = project / "reports"
    found = []
    if not root.is_dir():
        return found
    for d in root.iterdir():
        try:
            stamp = datetime.strptime(d.name, "%Y%m%dT%H%M%S.%fZ" if "." in d.name else "%Y%m%dT%H%M%SZ")
        except ValueError:
            continue
        dash = d / "dashboard.json"
        if dash.is_file() and json.loads(dash.read_text(encoding="utf-8")).get("plan_id") == plan_id:
            found.append((stamp, d))
    return sorted(found)


def cmd_report(args) -> int:
    plan = EvaluationPlan.from_dict(json.loads(_read(args.plan)))
    project = _project_dir()
    dirs = _report_dirs(project, plan.plan_id)
    if args.as_of:
        wanted = report_dir_name(_as_of(args.as_of))
        dirs = [(s, d) for s, d in dirs if d.name == wanted]
    if not dirs:
        print(f"error: no report found for plan {plan.plan_id}", file=sys.stderr)
        if args.format == "json":
            _emit_json({"ok": False, "errors": [f"no report found for plan {plan.plan_id}"]})
        return EXIT_IO
    latest = dirs[-1][1]
    name = "dashboard.json" if args.format == "json" else "summary.md"
    sys.stdout.write((latest / name).read_text(encoding="utf-8"))
    print(f"report: {latest}", file=sys.stderr)
    return EXIT_OK


# -- wiring ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qualimeter", description="Hierarchical quality model engine.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("validate", help="check a model against the derivation rules")
    p.add_argument("model")
    p.add_argument("--ruleset", help="override file with key=value lines, e.g. R1.max_height=4")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serialize", help="print the canonical form of a model")
    p.add_argument("model")
    p.set_defaults(func=cmd_serialize)

    p = sub.add_parser("evaluate", help="evaluate a model against a record file")
    p.add_argument("--model", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--as-of", required=True, dest="as_of")
    p.add_argument("--format", choices=("json", "md"), default="json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diversity", help="polymorphism degree of a model population")
    p.add_argument("--population", required=True)
    p.add_argument("--mode", choices=MODES, default="structural")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_diversity)

    p = sub.add_parser("init", help="initial phase: build the measurement context")
    p.add_argument("--objectives", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("plan", help="planning phase: write the evaluation plan")
    p.add_argument("--context", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--frequency", default="24h")
    p.add_argument("--out", required=True)
    p.add_argument("--lifecycle-stage", default="development", dest="lifecycle_stage")
    p.add_argument("--operator", help="aggregation operator override")
    p.add_argument("--ruleset", help="rule override file")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("ingest", help="append measurement records to the project store")
    p.add_argument("--plan", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="execution phase: evaluate as of a time and write reports")
    p.add_argument("--plan", required=True)
    p.add_argument("--as-of", required=True, dest="as_of")
    p.add_argument("--format", choices=("md", "json"), default="md")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-emit a previously written report")
    p.add_argument("--plan", required=True)
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--latest", action="store_true")
    which.add_argument("--as-of", dest="as_of")
    p.add_argument("--format", choices=("md", "json"), default="md")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    wants_json = getattr(args, "format", None) == "json"
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        code, message = EXIT_USAGE, str(exc)
    except (StoreUnwritable, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        code, message = EXIT_IO, str(exc)
    except (QualimeterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        for v in getattr(exc, "violations", ()):
            print(f"  {v.rule_id} {v.severity.value} {v.path}: {v.message}", file=sys.stderr)
        code, message = EXIT_VALIDATION, str(exc)
    if wants_json:
        _emit_json({"ok": False, "errors": [message]})
    return code


if __name__ == "__main__":
    sys.exit(main())
