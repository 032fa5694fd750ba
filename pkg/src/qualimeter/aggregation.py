"""Aggregation operators and bottom-up roll-up of leaf indicators.

Scores propagate from leaves to the root.  A node whose subtree holds no
measurement is marked NoData (``score is None``) rather than scored 0, and
its parent renormalizes weights over the children that do have data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import kernels
from .errors import (
    EmptyInput,
    IndicatorRange,
    LengthMismatch,
    ModelRuleViolations,
    NonPositiveWeight,
    UnknownLeafPath,
    UnknownOperator,
    UnsupportedOrganization,
)
from .metrics import Verdict, VerdictLevel, evaluate_thresholds
from .model import Characteristic, Organization, QualityModel, join_path

__all__ = [
    "OPERATORS",
    "ScoredNode",
    "Dispersion",
    "aggregate",
    "rollup",
    "score_tree",
    "dispersion",
    "operator_statistic",
]

OPERATORS = {
    "weighted-arithmetic-mean": kernels.ARITHMETIC,
    "weighted-geometric-mean": kernels.GEOMETRIC,
    "weighted-harmonic-mean": kernels.HARMONIC,
    "weighted-median": kernels.MEDIAN,
    "min": kernels.MINIMUM,
    "max": kernels.MAXIMUM,
}

# statistic each operator needs to be meaningful (see metrics.admissible_stats)
_OPERATOR_STATISTIC = {
    "weighted-arithmetic-mean": "arithmetic-mean",
    "weighted-geometric-mean": "geometric-mean",
    "weighted-harmonic-mean": "harmonic-mean",
    "weighted-median": "median",
    "min": "percentile",
    "max": "percentile",
}


def operator_statistic(operator: str) -> str:
    return _OPERATOR_STATISTIC[operator]


def aggregate(values: Sequence[float], weights: Sequence[float], operator: str) -> float:
    """Combine indicators with one of the six weighted operators.

    Weights are renormalized to sum to 1.  Geometric and harmonic means
    return 0 when any value is 0.  The weighted median is the smallest value
    whose cumulative weight reaches one half.
    """
    if len(values) == 0:
        raise EmptyInput("aggregate needs at least one value")
    if len(values) != len(weights):
        raise LengthMismatch(f"{len(values)} values but {len(weights)} weights")
    for w in weights:
        if not (w > 0 and math.isfinite(w)):
            raise NonPositiveWeight(f"weights must be positive and finite, got {w!r}")
    try:
        op = OPERATORS[operator]
    except KeyError:
        raise UnknownOperator(f"unknown aggregation operator {operator!r}") from None
    return kernels.aggregate(values, weights, op)


@dataclass(frozen=True)
class ScoredNode:
    name: str
    path: str
    weight: float
    score: float | None
    verdict: Verdict | None
    contributing_count: int
    children: tuple[ScoredNode, ...] = ()
    metric_verdicts: tuple[tuple[str, Verdict], ...] = ()

    @property
    def has_data(self) -> bool:
        return self.score is not None

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def find(self, path: str) -> ScoredNode:
        for node in self.walk():
            if node.path == path:
                return node
        raise KeyError(path)


def rollup(
    model: QualityModel,
    leaf_indicators: Mapping[str, float],
    metric_indicators: Mapping[str, float] | None = None,
    ruleset=None,
) -> ScoredNode:
    """Score every node of ``model`` from leaf indicators.

    ``leaf_indicators`` maps leaf paths to indicators in [0, 1].  The
    optional ``metric_indicators`` (``leaf/metric`` paths) lets leaves with
    several thresholded metrics report a verdict per metric; the leaf verdict
    is the worst of them.  Models with Error-severity rule violations under
    ``ruleset`` (default ruleset when omitted) are refused.
    """
    from .rules import check, default_ruleset, has_errors

    _require_hierarchical(model)
    violations = check(model, default_ruleset() if ruleset is None else ruleset)
    if has_errors(violations):
        raise ModelRuleViolations(violations)
    return score_tree(model, leaf_indicators, metric_indicators)


def _require_hierarchical(model: QualityModel) -> None:
    if model.organization is not Organization.HIERARCHICAL:
        raise UnsupportedOrganization(
            f"model {model.id!r} uses {model.organization.value} organization; only hierarchical models can be rolled up"
        )


def score_tree(
    model: QualityModel,
    leaf_indicators: Mapping[str, float],
    metric_indicators: Mapping[str, float] | None = None,
) -> ScoredNode:
    """:func:`rollup` without the derivation-rule gate, for callers that already ran it."""
    _require_hierarchical(model)
    leaves = set(model.leaf_paths())
    for path, value in leaf_indicators.items():
        if path not in leaves:
            raise UnknownLeafPath(f"{path!r} is not a leaf of model {model.id!r}")
        _check_indicator(path, value)
    for path, value in (metric_indicators or {}).items():
        _check_indicator(path, value)

    op = OPERATORS[model.aggregation_operator]
    return _score(model.root, "", leaf_indicators, metric_indicators or {}, op)


def _check_indicator(path: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
        raise IndicatorRange(f"indicator for {path!r} must lie in [0, 1], got {value!r}")


def _score(node: Characteristic, path: str, leaf_ind, metric_ind, op: int) -> ScoredNode:
    if node.is_leaf:
        score = leaf_ind.get(path)
        verdict = None
        metric_verdicts = []
        if score is not None:
            for m in node.metrics:
                if m.thresholds is None:
                    continue
                value = metric_ind.get(join_path(path, m.name), score)
                metric_verdicts.append((m.name, evaluate_thresholds(m.thresholds, value)))
            if metric_verdicts:
                verdict = min((v for _, v in metric_verdicts), key=lambda v: v.level)
        return ScoredNode(
            name=node.name,
            path=path,
            weight=node.weight,
            score=None if score is None else float(score),
            verdict=verdict,
            contributing_count=0 if score is None else 1,
            metric_verdicts=tuple(metric_verdicts),
        )

    children = tuple(_score(c, join_path(path, c.name), leaf_ind, metric_ind, op) for c in node.children)
    present = [c for c in children if c.score is not None]
    score = None
    if present:
        score = kernels.aggregate([c.score for c in present], [c.weight for c in present], op)
    return ScoredNode(
        name=node.name,
        path=path,
        weight=node.weight,
        score=score,
        verdict=None,
        contributing_count=sum(c.contributing_count for c in children),
        children=children,
    )


@dataclass(frozen=True)
class Dispersion:
    variance: float
    stddev: float
    n: int


def dispersion(values: Sequence[float]) -> Dispersion:
    """Population variance (divide by n) and standard deviation."""
    n = len(values)
    if n == 0:
        raise EmptyInput("dispersion needs at least one value")
    mean = math.fsum(values) / n
    variance = math.fsum((v - mean) ** 2 for v in values) / n
    return Dispersion(variance, math.sqrt(variance), n)


def worst_level(verdicts) -> VerdictLevel | None:
    levels = [v.level for v in verdicts if v is not None]
    return min(levels) if levels else None
