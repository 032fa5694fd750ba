# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; mirrors _kernels_py operation for operation."""

from libc.math cimport exp, log
from libc.stdlib cimport malloc, free

cdef enum:
    ARITHMETIC = 0
    GEOMETRIC = 1
    HARMONIC = 2
    MEDIAN = 3
    MINIMUM = 4
    MAXIMUM = 5

cdef double MEDIAN_SLACK = 1e-12


cdef void _argsort(const double[:] values, Py_ssize_t *order, Py_ssize_t *tmp, Py_ssize_t n) noexcept nogil:
    # stable bottom-up merge sort: ties keep index order
    cdef Py_ssize_t width = 1, lo, mid, hi, a, b, k, i
    cdef Py_ssize_t *src = order
    cdef Py_ssize_t *dst = tmp
    cdef Py_ssize_t *swap
    for i in range(n):
        order[i] = i
    while width < n:
        lo = 0
        while lo < n:
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            a = lo
            b = mid
            k = lo
            while a < mid and b < hi:
                if values[src[b]] < values[src[a]]:
                    dst[k] = src[b]
                    b += 1
                else:
                    dst[k] = src[a]
                    a += 1
                k += 1
            while a < mid:
                dst[k] = src[a]
                a += 1
                k += 1
            while b < hi:
                dst[k] = src[b]
                b += 1
                k += 1
            lo += 2 * width
        swap = src
        src = dst
        dst = swap
        width *= 2
    if src != order:
        for i in range(n):
            order[i] = src[i]


def aggregate(const double[:] values, const double[:] weights, int op):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double total = 0.0, lo, hi, acc, cum, result, v
    cdef Py_ssize_t *order

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
            acc += (weights[i] / total) * log(values[i])
        result = exp(acc)
    elif op == HARMONIC:
        if lo <= 0.0:
            return 0.0
        acc = 0.0
        for i in range(n):
            acc += (weights[i] / total) / values[i]
        result = 1.0 / acc
    elif op == MEDIAN:
        order = <Py_ssize_t *> malloc(2 * n * sizeof(Py_ssize_t))
        if order == NULL:
            raise MemoryError()
        try:
            _argsort(values, order, order + n, n)
            cum = 0.0
            result = values[order[n - 1]]
            for k in range(n):
                i = order[k]
                cum += weights[i] / total
                if cum >= 0.5 - MEDIAN_SLACK:
                    result = values[i]
                    break
        finally:
            free(order)
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


def pair_sum(const double[:] freqs, const double[:] dist, Py_ssize_t n):
    cdef Py_ssize_t i, j
    cdef double acc = 0.0, row
    with nogil:
        for i in range(n):
            row = 0.0
            for j in range(n):
                if i != j:
                    row += freqs[j] * dist[i * n + j]
            acc += freqs[i] * row
    return acc
