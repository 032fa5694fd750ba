"""Pure-Python kernels; reference behaviour for the compiled ``_kernels`` module.

Both implementations must perform the same floating-point operations in the
same order so results are bit-identical across backends.
"""

from __future__ import annotations

import math

ARITHMETIC = 0
GEOMETRIC = 1
HARMONIC = 2
MEDIAN = 3
MINIMUM = 4
MAXIMUM = 5

# cumulative-weight slack for the weighted median, absorbs renormalization rounding
MEDIAN_SLACK = 1e-12


def aggregate(values, weights, op):
    n = len(values)
    total = 0.0
    for i in range(n):
        total += weights[i]
    lo = values[0]
    hi = values[0]
    for i in range(1, n):
        v = values[i]
        if v < lo:
            lo = v
        if v > hi:
            hi = v

    if op == ARITHMETIC:
        acc = 0.0
        for i in range(n):
            acc += (weights[i] / total) * values[i]
        result = acc
    elif op == GEOMETRIC:
        if lo <= 0.0:
            return 0.0
        acc = 0.0
        for i in range(n):
            acc += (weights[i] / total) * math.log(values[i])
        result = math.exp(acc)
    elif op == HARMONIC:
        if lo <= 0.0:
            return 0.0
        acc = 0.0
        for i in range(n):
            acc += (weights[i] / total) / values[i]
        result = 1.0 / acc
    elif op == MEDIAN:
        order = sorted(range(n), key=lambda i: (values[i], i))
        cum = 0.0
        result = values[order[n - 1]]
        for i in order:
            cum += weights[i] / total
            if cum >= 0.5 - MEDIAN_SLACK:
                result = values[i]
                break
    elif op == MINIMUM:
        return lo
    elif op == MAXIMUM:
        return hi
    else:
        raise ValueError(f"unknown operator code {op}")

    if result < lo:
        return lo
    if result > hi:
        return hi
    return result


def pair_sum(freqs, dist, n):
    """Sum over ordered pairs of ``freqs[i] * freqs[j] * dist[i*n + j]``."""
    acc = 0.0
    for i in range(n):
        row = 0.0
        for j in range(n):
            if i != j:
                row += freqs[j] * dist[i * n + j]
        acc += freqs[i] * row
    return acc
