"""Quality model domain types and structural queries on the characteristic tree.

A :class:`QualityModel` carries the eight design attributes (context,
purpose, assessment method, information source, data organization,
derivation ruleset, weights held in the tree, lineage) plus the rooted tree
of :class:`Characteristic` nodes.  Models are immutable once built.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

from .errors import (
    DuplicateSiblingName,
    EmptyTree,
    InvalidName,
    MissingAttribute,
    MixedNode,
    NonPositiveWeight,
)
from .metrics import MetricSpec

__all__ = [
    "Purpose",
    "AssessmentMethod",
    "InformationSource",
    "QemAttributes",
    "Organization",
    "Characteristic",
    "QualityModel",
    "MODEL_MARKER",
    "WEIGHT_TOLERANCE",
    "build_model",
    "normalize_weights",
    "model_paths",
    "iter_nodes",
    "tree_height",
    "purpose_capabilities",
    "structurally_equal",
]

MODEL_MARKER = "@model"
WEIGHT_TOLERANCE = 1e-9
PATH_SEPARATOR = "/"

_NAME_RE = re.compile(r"[A-Za-z0-9_-]+\Z")


class Purpose(enum.Enum):
    DEFINITION = "definition"
    ASSESSMENT = "assessment"
    PREDICTION = "prediction"
    MULTI_PURPOSE = "multi-purpose"


class AssessmentMethod(enum.Enum):
    RIGOROUS = "rigorous"
    SHORT_CUT = "short-cut"
    APPROXIMATE = "approximate"


class InformationSource(enum.Enum):
    EXPERT = "expert"
    NON_EXPERT = "non-expert"
    HYBRID = "hybrid"


class Organization(enum.Enum):
    HIERARCHICAL = "hierarchical"
    META_MODEL = "meta-model"
    STATISTICAL_IMPLICIT = "statistical-implicit"


@dataclass(frozen=True)
class QemAttributes:
    assessment_method: AssessmentMethod
    information_source: InformationSource

    def __post_init__(self) -> None:
        if not isinstance(self.assessment_method, AssessmentMethod):
            raise MissingAttribute("qem assessment method must be set", MODEL_MARKER)
        if not isinstance(self.information_source, InformationSource):
            raise MissingAttribute("qem information source must be set", MODEL_MARKER)


_CAPABILITIES = {
    Purpose.DEFINITION: frozenset({"describe"}),
    Purpose.ASSESSMENT: frozenset({"describe", "assess"}),
    Purpose.PREDICTION: frozenset({"describe", "assess", "predict"}),
    Purpose.MULTI_PURPOSE: frozenset({"describe", "assess", "predict"}),
}


def purpose_capabilities(purpose: Purpose) -> frozenset[str]:
    """Capabilities granted by a purpose; each level extends the previous one."""
    return _CAPABILITIES[purpose]


@dataclass(frozen=True)
class Characteristic:
    name: str
    weight: float
    children: tuple[Characteristic, ...] = ()
    metrics: tuple[MetricSpec, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def metric(self, name: str) -> MetricSpec | None:
        for m in self.metrics:
            if m.name == name:
                return m
        return None


@dataclass(frozen=True)
class QualityModel:
    id: str
    title: str
    context: str
    purpose: Purpose
    qem: QemAttributes
    organization: Organization
    ruleset_ref: str
    root: Characteristic
    aggregation_operator: str = "weighted-arithmetic-mean"
    lineage: tuple[str, ...] = ()
    _nodes: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_nodes", dict(_walk(self.root, "")))

    @property
    def capabilities(self) -> frozenset[str]:
        return purpose_capabilities(self.purpose)

    def node(self, path: str) -> Characteristic:
        """Characteristic at ``path``; the empty string addresses the root."""
        try:
            return self._nodes[path]
        except KeyError:
            raise KeyError(f"no characteristic at path {path!r}") from None

    def has_path(self, path: str) -> bool:
        return path in self._nodes

    def leaf_paths(self) -> list[str]:
        return [p for p, n in self._nodes.items() if n.is_leaf]

    def metric_paths(self) -> list[str]:
        """``leaf-path/metric-name`` for every metric declared in the tree."""
        out = []
        for path, node in self._nodes.items():
            for m in node.metrics:
                out.append(join_path(path, m.name))
        return out

    def resolve_metric(self, metric_path: str) -> tuple[str, MetricSpec]:
        """Split a metric path into its leaf path and metric spec."""
        leaf, _, name = metric_path.rpartition(PATH_SEPARATOR)
        node = self._nodes.get(leaf)
        spec = node.metric(name) if node is not None else None
        if spec is None:
            raise KeyError(f"unknown metric path {metric_path!r}")
        return leaf, spec


def join_path(parent: str, name: str) -> str:
    return f"{parent}{PATH_SEPARATOR}{name}" if parent else name


def _walk(node: Characteristic, path: str) -> Iterator[tuple[str, Characteristic]]:
    yield path, node
    for child in node.children:
        yield from _walk(child, join_path(path, child.name))


def iter_nodes(model: QualityModel) -> Iterator[tuple[str, Characteristic]]:
    """Pre-order traversal yielding ``(path, node)``; the root has path ``""``."""
    return _walk(model.root, "")


def model_paths(model: QualityModel) -> frozenset[str]:
    return frozenset(p for p, _ in _walk(model.root, "") if p)


def tree_height(model: QualityModel | Characteristic) -> int:
    root = model.root if isinstance(model, QualityModel) else model
    height = 0
    stack = [(root, 0)]
    while stack:
        node, depth = stack.pop()
        height = max(height, depth)
        stack.extend((c, depth + 1) for c in node.children)
    return height


def normalize_weights(tree: Characteristic) -> Characteristic:
    """Divide each sibling group's weights by the group sum.

    The root forms a singleton group, so its weight becomes 1.  Applying the
    function twice gives the same tree up to floating-point rounding.
    """
    _check_weight(tree.weight, tree.name)
    return _normalize(tree, 1.0)


def _check_weight(weight: float, where: str) -> None:
    if not (isinstance(weight, (int, float)) and math.isfinite(weight) and weight > 0):
        raise NonPositiveWeight(f"weight of {where!r} must be a positive finite number, got {weight!r}", where)


def _normalize(node: Characteristic, weight: float) -> Characteristic:
    if not node.children:
        return Characteristic(node.name, weight, (), node.metrics)
    for c in node.children:
        _check_weight(c.weight, c.name)
    total = 0.0
    for c in node.children:
        total += c.weight
    children = tuple(_normalize(c, c.weight / total) for c in node.children)
    return Characteristic(node.name, weight, children, node.metrics)


_REQUIRED_ATTRIBUTES = (
    "id",
    "context",
    "purpose",
    "assessment_method",
    "information_source",
    "organization",
    "ruleset",
    "lineage",
)


def build_model(attributes: Mapping[str, Any], tree: Characteristic | Mapping[str, Any]) -> QualityModel:
    """Assemble a validated, weight-normalized :class:`QualityModel`.

    ``attributes`` must provide ``id``, ``context``, ``purpose``,
    ``assessment_method``, ``information_source``, ``organization``,
    ``ruleset`` and ``lineage``; ``title`` and ``aggregation`` are optional.
    Enum-valued attributes accept either the enum member or its text value.
    ``tree`` is a :class:`Characteristic` or a nested mapping with keys
    ``name``, ``weight``, ``children`` and ``metrics``.
    """
    for key in _REQUIRED_ATTRIBUTES:
        if key not in attributes or attributes[key] is None:
            raise MissingAttribute(f"missing model attribute {key!r}", MODEL_MARKER)
    if tree is None:
        raise EmptyTree("model has no characteristic tree", MODEL_MARKER)
    root = tree if isinstance(tree, Characteristic) else _from_mapping(tree)
    _validate_structure(root, "")
    root = normalize_weights(root)

    from .aggregation import OPERATORS  # deferred: aggregation imports this module

    operator = attributes.get("aggregation") or "weighted-arithmetic-mean"
    if operator not in OPERATORS:
        raise MissingAttribute(f"unknown aggregation operator {operator!r}", MODEL_MARKER)
    qem = QemAttributes(
        _enum(AssessmentMethod, attributes["assessment_method"], "assessment_method"),
        _enum(InformationSource, attributes["information_source"], "information_source"),
    )
    return QualityModel(
        id=str(attributes["id"]),
        title=str(attributes.get("title") or attributes["id"]),
        context=str(attributes["context"]),
        purpose=_enum(Purpose, attributes["purpose"], "purpose"),
        qem=qem,
        organization=_enum(Organization, attributes["organization"], "organization"),
        ruleset_ref=str(attributes["ruleset"]),
        root=root,
        aggregation_operator=operator,
        lineage=tuple(str(x) for x in attributes["lineage"]),
    )


def _enum(kind: type[enum.Enum], value: Any, key: str):
    if isinstance(value, kind):
        return value
    try:
        return kind(value)
    except ValueError:
        raise MissingAttribute(f"invalid value {value!r} for attribute {key!r}", MODEL_MARKER) from None


def _from_mapping(desc: Mapping[str, Any]) -> Characteristic:
    if not desc:
        raise EmptyTree("empty tree description", MODEL_MARKER)
    children = tuple(_from_mapping(c) for c in desc.get("children", ()))
    return Characteristic(
        name=desc.get("name", ""),
        weight=desc.get("weight", 1.0),
        children=children,
        metrics=tuple(desc.get("metrics", ())),
    )


def _validate_structure(node: Characteristic, path: str) -> None:
    where = path or MODEL_MARKER
    if not isinstance(node.name, str) or not _NAME_RE.match(node.name):
        raise InvalidName(f"invalid characteristic name {node.name!r}", where)
    if node.children and node.metrics:
        raise MixedNode(f"characteristic {node.name!r} has both children and metrics", where)
    seen: set[str] = set()
    for m in node.metrics:
        if not _NAME_RE.match(m.name):
            raise InvalidName(f"invalid metric name {m.name!r}", where)
        if m.name in seen:
            raise DuplicateSiblingName(f"duplicate metric {m.name!r} under {node.name!r}", where)
        seen.add(m.name)
    seen = set()
    for child in node.children:
        child_path = join_path(path, child.name)
        if child.name in seen:
            raise DuplicateSiblingName(f"duplicate sibling name {child.name!r}", child_path)
        seen.add(child.name)
        _check_weight(child.weight, child_path)
        _validate_structure(child, child_path)


def structurally_equal(a: QualityModel, b: QualityModel, tol: float = WEIGHT_TOLERANCE) -> bool:
    """Attribute-for-attribute equality with numbers compared within ``tol``."""
    if (a.id, a.title, a.context, a.purpose, a.qem, a.organization, a.ruleset_ref,
            a.aggregation_operator, a.lineage) != (b.id, b.title, b.context, b.purpose, b.qem,
                                                   b.organization, b.ruleset_ref,
                                                   b.aggregation_operator, b.lineage):
        return False
    return _nodes_equal(a.root, b.root, tol)


def _close(x: float | None, y: float | None, tol: float) -> bool:
    if x is None or y is None:
        return x is y
    return abs(x - y) <= tol


def _metrics_equal(m: MetricSpec, n: MetricSpec, tol: float) -> bool:
    if (m.name, m.scale, m.unit, m.direction) != (n.name, n.scale, n.unit, n.direction):
        return False
    if not (_close(m.normalization.from_raw, n.normalization.from_raw, tol)
            and _close(m.normalization.to_raw, n.normalization.to_raw, tol)):
        return False
    s, t = m.thresholds, n.thresholds
    if s is None or t is None:
        return s is t
    return all(_close(getattr(s, f), getattr(t, f), tol) for f in ("reject", "accept", "target", "reference"))


def _nodes_equal(x: Characteristic, y: Characteristic, tol: float) -> bool:
    if x.name != y.name or not _close(x.weight, y.weight, tol):
        return False
    if len(x.children) != len(y.children) or len(x.metrics) != len(y.metrics):
        return False
    if not all(_metrics_equal(m, n, tol) for m, n in zip(x.metrics, y.metrics)):
        return False
    return all(_nodes_equal(c, d, tol) for c, d in zip(x.children, y.children))
