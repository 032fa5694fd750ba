"""Derivation-rule engine for quality model trees.

Rules are looked up by id in a registry; a ruleset is an ordered list of
:class:`Rule` values carrying severity and parameters.  ``check`` runs every
rule and returns violations sorted by (rule id, path).

R4 interprets "division by equal characteristic" as a bound on the number of
children of each internal node.  The phrase admits other readings (equal
sibling weights, comparable granularity); the arity reading is the one
implemented here.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator

from .errors import RulesetError, UnknownRuleId
from .model import MODEL_MARKER, QualityModel, iter_nodes, purpose_capabilities

__all__ = [
    "Severity",
    "Rule",
    "RuleViolation",
    "RULES",
    "default_ruleset",
    "extended_ruleset",
    "check",
    "has_errors",
    "apply_overrides",
    "load_overrides",
]


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Rule:
    id: str
    name: str
    severity: Severity
    params: dict = field(default_factory=dict, hash=False)


@dataclass(frozen=True)
class RuleViolation:
    rule_id: str
    path: str
    message: str
    severity: Severity

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_id,
            "path": self.path,
            "severity": self.severity.value,
            "message": self.message,
        }


Checker = Callable[[QualityModel, dict], Iterator[tuple[str, str]]]


def _where(path: str) -> str:
    return path or MODEL_MARKER


def _max_height(model: QualityModel, params: dict):
    limit = int(params["max_height"])
    for path, node in iter_nodes(model):
        depth = 0 if not path else path.count("/") + 1
        if node.is_leaf and depth > limit:
            yield _where(path), f"leaf depth {depth} exceeds maximum tree height {limit}"


def _sibling_weight_sum(model: QualityModel, params: dict):
    tol = float(params["tolerance"])
    if abs(model.root.weight - 1.0) > tol:
        yield MODEL_MARKER, f"root weight is {model.root.weight!r}, expected 1"
    for path, node in iter_nodes(model):
        if not node.children:
            continue
        total = sum(c.weight for c in node.children)
        if abs(total - 1.0) > tol:
            yield _where(path), f"children weights sum to {total!r}, expected 1 within {tol:g}"


def _leaf_simplicity(model: QualityModel, params: dict):
    if "assess" not in purpose_capabilities(model.purpose):
        return
    for path, node in iter_nodes(model):
        if node.is_leaf and not node.metrics:
            yield _where(path), f"leaf {node.name!r} carries no metric; branch until only simple characteristics remain"


def _division_arity(model: QualityModel, params: dict):
    lo, hi = int(params["min_children"]), int(params["max_children"])
    for path, node in iter_nodes(model):
        n = len(node.children)
        if n and not lo <= n <= hi:
            yield _where(path), f"{n} sub-characteristic(s), expected between {lo} and {hi}"


def _unique_paths(model: QualityModel, params: dict):
    seen: set[str] = set()
    for path, _ in iter_nodes(model):
        if path in seen:
            yield _where(path), f"duplicate characteristic path {path!r}"
        seen.add(path)


def _threshold_presence(model: QualityModel, params: dict):
    if "assess" not in purpose_capabilities(model.purpose):
        return
    for path, node in iter_nodes(model):
        for m in node.metrics:
            if m.thresholds is None:
                yield _where(path), f"metric {m.name!r} has no thresholds; it will be scored without a verdict"


def _aggregation_admissibility(model: QualityModel, params: dict):
    from .aggregation import operator_statistic
    from .metrics import admissible_stats

    needed = operator_statistic(model.aggregation_operator)
    weakest = None
    for path, node in iter_nodes(model):
        for m in node.metrics:
            if weakest is None or m.scale.rank < weakest[1].scale.rank:
                weakest = (path, m)
    if weakest is not None and needed not in admissible_stats(weakest[1].scale):
        path, m = weakest
        yield MODEL_MARKER, (
            f"{model.aggregation_operator} needs {needed}, not admissible on the "
            f"{m.scale.value} scale of metric {path}/{m.name}"
        )


@dataclass(frozen=True)
class _RuleDef:
    name: str
    checker: Checker
    severity: Severity
    params: dict


RULES: dict[str, _RuleDef] = {
    "R1": _RuleDef("MaxHeight", _max_height, Severity.ERROR, {"max_height": 5}),
    "R2": _RuleDef("SiblingWeightSum", _sibling_weight_sum, Severity.ERROR, {"tolerance": 1e-9}),
    "R3": _RuleDef("LeafSimplicity", _leaf_simplicity, Severity.ERROR, {}),
    "R4": _RuleDef("DivisionArity", _division_arity, Severity.WARNING, {"min_children": 2, "max_children": 9}),
    "R5": _RuleDef("UniquePaths", _unique_paths, Severity.ERROR, {}),
    "R6": _RuleDef("ThresholdPresence", _threshold_presence, Severity.WARNING, {}),
    "M1": _RuleDef("AggregationAdmissibility", _aggregation_admissibility, Severity.WARNING, {}),
}

_DEFAULT_IDS = ("R1", "R2", "R3", "R4", "R5", "R6")


def _rule(rule_id: str) -> Rule:
    d = RULES[rule_id]
    return Rule(rule_id, d.name, d.severity, dict(d.params))


def default_ruleset() -> list[Rule]:
    return [_rule(i) for i in _DEFAULT_IDS]


def extended_ruleset() -> list[Rule]:
    """Default rules plus the scale-admissibility check on the aggregation operator."""
    return default_ruleset() + [_rule("M1")]


def _id_key(rule_id: str):
    m = re.match(r"([A-Za-z]*)(\d*)", rule_id)
    prefix, num = m.group(1), m.group(2)
    return (prefix, int(num) if num else -1, rule_id)


def check(model: QualityModel, ruleset: Iterable[Rule]) -> list[RuleViolation]:
    ruleset = list(ruleset)
    ids = [r.id for r in ruleset]
    if len(set(ids)) != len(ids):
        raise RulesetError(f"duplicate rule ids in ruleset: {ids}")
    out: list[RuleViolation] = []
    for rule in ruleset:
        try:
            definition = RULES[rule.id]
        except KeyError:
            raise UnknownRuleId(f"unknown rule id {rule.id!r}") from None
        params = {**definition.params, **rule.params}
        for path, message in definition.checker(model, params):
            out.append(RuleViolation(rule.id, path, message, rule.severity))
    out.sort(key=lambda v: (_id_key(v.rule_id), v.path, v.message))
    return out


def has_errors(violations: Iterable[RuleViolation]) -> bool:
    return any(v.severity is Severity.ERROR for v in violations)


def apply_overrides(ruleset: list[Rule], overrides: dict[str, str]) -> list[Rule]:
    """Apply ``R1.max_height=4`` style overrides; unknown keys raise RulesetError."""
    by_id = {r.id: r for r in ruleset}
    for key, raw in overrides.items():
        rule_id, dot, attr = key.partition(".")
        if not dot or rule_id not in by_id:
            raise RulesetError(f"unknown ruleset key {key!r}")
        rule = by_id[rule_id]
        if attr == "severity":
            try:
                by_id[rule_id] = replace(rule, severity=Severity(raw.strip().lower()))
            except ValueError:
                raise RulesetError(f"{key}: severity must be 'error' or 'warning', got {raw!r}") from None
        elif attr in rule.params:
            default = RULES[rule_id].params[attr]
            try:
                value = type(default)(raw.strip())
            except ValueError:
                raise RulesetError(f"{key}: expected {type(default).__name__}, got {raw!r}") from None
            by_id[rule_id] = replace(rule, params={**rule.params, attr: value})
        else:
            raise RulesetError(f"unknown ruleset key {key!r}")
    return [by_id[r.id] for r in ruleset]


def load_overrides(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq or not key.strip():
            raise RulesetError(f"line {lineno}: expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out
