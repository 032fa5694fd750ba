"""Independent reference implementations used as test oracles.

These deliberately avoid the library's kernels: weights are normalized with
exact rationals, the median walks a sorted copy, and the tree recursion is
written from scratch over ``Characteristic`` objects.
"""

from __future__ import annotations

import math
from fractions import Fraction

from qualimeter.model import Characteristic


def weighted(values, weights, operator: str) -> float:
    total = sum(Fraction(w) for w in weights)
    shares = [Fraction(w) / total for w in weights]
    if operator == "weighted-arithmetic-mean":
        return float(sum(s * Fraction(v) for s, v in zip(shares, values)))
    if operator == "weighted-geometric-mean":
        if min(values) == 0:
            return 0.0
        return math.prod(v ** float(s) for s, v in zip(shares, values))
    if operator == "weighted-harmonic-mean":
        if min(values) == 0:
            return 0.0
        return float(1 / sum(s / Fraction(v) for s, v in zip(shares, values)))
    if operator == "weighted-median":
        acc = Fraction(0)
        for v, s in sorted(zip(values, shares), key=lambda p: p[0]):
            acc += s
            if acc >= Fraction(1, 2):
                return v
        raise AssertionError("unreachable")
    if operator == "min":
        return min(values)
    if operator == "max":
        return max(values)
    raise ValueError(operator)


def nested(node: Characteristic, path: str, leaf_values: dict, operator: str):
    """Root score by explicit recursion; None when the subtree has no data."""
    if not node.children:
        return leaf_values.get(path)
    scored = []
    for c in node.children:
        s = nested(c, f"{path}/{c.name}" if path else c.name, leaf_values, operator)
        if s is not None:
            scored.append((s, c.weight))
    if not scored:
        return None
    return weighted([s for s, _ in scored], [w for _, w in scored], operator)


def double_loop_pi(freqs, dist) -> float:
    n = len(freqs)
    return math.fsum(freqs[i] * freqs[j] * dist[i][j] for i in range(n) for j in range(n))
