"""Compare the compiled and pure-Python kernels.

Usage::

    python benchmarks/bench_kernels.py [--sizes 8 64 1024] [--repeat 5]

Prints one row per (kernel, operator, size) with the best per-call time of
each backend and the speed-up.  Results are checked for equality before
timing so a fast but wrong backend cannot look good.
"""

from __future__ import annotations

import argparse
import random
import sys
import timeit
from array import array

from qualimeter import kernels
from qualimeter.aggregation import OPERATORS


def _best(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def _row(name: str, size: int, t_py: float, t_c: float | None) -> str:
    if t_c is None:
        return f"{name:<34} {size:>6} {t_py * 1e6:>12.2f} {'n/a':>12} {'n/a':>8}"
    return f"{name:<34} {size:>6} {t_py * 1e6:>12.2f} {t_c * 1e6:>12.2f} {t_py / t_c:>7.1f}x"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[8, 64, 1024])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backs = kernels.backends()
    py, cy = backs["python"], backs.get("cython")
    if cy is None:
        print("compiled kernels are not built; timing the Python backend only", file=sys.stderr)
    rng = random.Random(args.seed)

    print(f"{'kernel':<34} {'n':>6} {'python us':>12} {'cython us':>12} {'speedup':>8}")
    for size in args.sizes:
        values = [rng.random() for _ in range(size)]
        weights = [rng.uniform(0.1, 2.0) for _ in range(size)]
        va, wa = array("d", values), array("d", weights)
        for op_name, code in OPERATORS.items():
            t_py = _best(lambda: py.aggregate(values, weights, code), args.repeat)
            t_c = None
            if cy is not None:
                assert cy.aggregate(va, wa, code) == py.aggregate(values, weights, code)
                t_c = _best(lambda: cy.aggregate(va, wa, code), args.repeat)
            print(_row(f"aggregate/{op_name}", size, t_py, t_c))

    for size in [s for s in args.sizes if s <= 256] or [16]:
        freqs = [rng.random() for _ in range(size)]
        dist = [rng.random() for _ in range(size * size)]
        fa, da = array("d", freqs), array("d", dist)
        t_py = _best(lambda: py.pair_sum(freqs, dist, size), args.repeat)
        t_c = None
        if cy is not None:
            assert cy.pair_sum(fa, da, size) == py.pair_sum(freqs, dist, size)
            t_c = _best(lambda: cy.pair_sum(fa, da, size), args.repeat)
        print(_row("pair_sum", size, t_py, t_c))
    return 0


if __name__ == "__main__":
    sys.exit(main())
