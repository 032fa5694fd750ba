"""Shared fixture builders and a seeded random-tree generator."""

from __future__ import annotations

import random
from pathlib import Path

from qualimeter.metrics import Direction, LinearNormalization, MetricSpec, Scale, ThresholdSet
from qualimeter.model import Characteristic, build_model

EXAMPLES = Path(__file__).resolve().parent.parent / "docs" / "examples"

OPERATOR_NAMES = (
    "weighted-arithmetic-mean",
    "weighted-geometric-mean",
    "weighted-harmonic-mean",
    "weighted-median",
    "min",
    "max",
)


def attrs(**over) -> dict:
    base = {
        "id": "m",
        "context": "",
        "purpose": "assessment",
        "assessment_method": "short-cut",
        "information_source": "expert",
        "organization": "hierarchical",
        "ruleset": "default",
        "lineage": (),
    }
    base.update(over)
    return base


def metric(name: str = "m", thresholds: ThresholdSet | None = ThresholdSet(0.2, 0.4, 0.8), scale=Scale.RATIO) -> MetricSpec:
    return MetricSpec(name, scale, "u", Direction.HIGHER_BETTER, LinearNormalization(0.0, 1.0), thresholds)


def leaf(name: str, weight: float = 1.0, metrics=None) -> Characteristic:
    return Characteristic(name, weight, (), tuple(metrics) if metrics is not None else (metric(),))


def node(name: str, weight: float, *children: Characteristic) -> Characteristic:
    return Characteristic(name, weight, tuple(children))


def two_leaf_model(operator: str = "weighted-arithmetic-mean", purpose: str = "assessment"):
    root = node("quality", 1.0, leaf("a", 0.7), leaf("b", 0.3))
    return build_model(attrs(aggregation=operator, purpose=purpose), root)


def random_tree(rng: random.Random, max_nodes: int, max_children: int = 4, max_depth: int = 6) -> Characteristic:
    """Random tree with at most ``max_nodes`` nodes (root included) and raw positive weights.

    Leaves sit at depth ``max_depth`` or shallower (the root is depth 0).
    """
    budget = [max_nodes - 1]
    counter = [0]

    def grow(depth: int) -> Characteristic:
        counter[0] += 1
        name = f"n{counter[0]}"
        weight = rng.choice([rng.uniform(0.01, 10.0), float(rng.randint(1, 9))])
        k = 0
        if budget[0] > 0 and depth < max_depth and rng.random() < 0.7:
            k = rng.randint(1, min(max_children, budget[0]))
            budget[0] -= k
        if k == 0:
            return leaf(name, weight)
        return Characteristic(name, weight, tuple(grow(depth + 1) for _ in range(k)))

    counter[0] += 1
    k = rng.randint(1, min(max_children, budget[0])) if budget[0] > 0 else 0
    budget[0] -= k
    if k == 0:
        return leaf("root", 1.0)
    return Characteristic("root", 1.0, tuple(grow(1) for _ in range(k)))


def count_nodes(node: Characteristic) -> int:
    return 1 + sum(count_nodes(c) for c in node.children)
