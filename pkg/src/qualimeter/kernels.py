"""Backend selection for the numeric kernels.

The compiled ``_kernels`` extension is used when it was built; otherwise, or
when ``QUALIMETER_PURE_PYTHON=1`` is set, the pure-Python twin is loaded.
Both expose ``aggregate(values, weights, op)`` and ``pair_sum(freqs, dist, n)``.
"""

from __future__ import annotations

import os
from array import array

from . import _kernels_py

try:
    if os.environ.get("QUALIMETER_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels forced by environment")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"

ARITHMETIC = _kernels_py.ARITHMETIC
GEOMETRIC = _kernels_py.GEOMETRIC
HARMONIC = _kernels_py.HARMONIC
MEDIAN = _kernels_py.MEDIAN
MINIMUM = _kernels_py.MINIMUM
MAXIMUM = _kernels_py.MAXIMUM


def _doubles(seq) -> array:
    return seq if isinstance(seq, array) and seq.typecode == "d" else array("d", seq)


if _compiled is not None:

    def aggregate(values, weights, op: int) -> float:
        return _compiled.aggregate(_doubles(values), _doubles(weights), op)

    def pair_sum(freqs, dist, n: int) -> float:
        return _compiled.pair_sum(_doubles(freqs), _doubles(dist), n)

else:
    aggregate = _kernels_py.aggregate
    pair_sum = _kernels_py.pair_sum


def backends() -> dict:
    """Every available backend by name, for benchmarks and cross-checks."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
