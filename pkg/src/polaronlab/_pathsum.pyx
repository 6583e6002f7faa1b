# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pair-sum kernels.

The interaction table holds kernel values per time lag: table[k, i] is
W(i * dr, k * dt).  Lookups are linear in r with far-field value 0 beyond
the last node; out-of-range lookups are counted and reported.  Summation
order is fixed (row-major over ordered pairs) so results are bit-stable.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline double _lookup(const double[:, ::1] table, Py_ssize_t k, double r,
                           double inv_dr, Py_ssize_t n_r, long* misses) nogil:
    cdef double u = r * inv_dr
    cdef Py_ssize_t i0
    cdef double frac
    if u > n_r - 1:
        misses[0] += 1
        return 0.0
    i0 = <Py_ssize_t>u
    if i0 >= n_r - 1:
        i0 = n_r - 2
    frac = u - i0
    return table[k, i0] + (table[k, i0 + 1] - table[k, i0]) * frac


cdef inline double _dist(const double[:, ::1] a, Py_ssize_t i,
                         const double[:, ::1] b, Py_ssize_t j, Py_ssize_t d) nogil:
    cdef double s = 0.0, v
    cdef Py_ssize_t c
    for c in range(d):
        v = a[i, c] - b[j, c]
        s += v * v
    return sqrt(s)


def double_sum(const double[:, ::1] points, const double[::1] weights,
               const double[:, ::1] table, double inv_dr, double dt):
    """Full weighted pair sum  dt^2 * sum_ij w_i w_j W(|x_i - x_j|, |i-j| dt)."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t n_r = table.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc = 0.0, r
    cdef double diag = table[0, 0]
    cdef long misses = 0
    with nogil:
        for i in range(n):
            acc += weights[i] * weights[i] * diag
        for i in range(n):
            for j in range(i + 1, n):
                r = _dist(points, i, points, j, d)
                acc += 2.0 * weights[i] * weights[j] * _lookup(
                    table, j - i, r, inv_dr, n_r, &misses)
    return acc * dt * dt, misses


def block_delta(const double[:, ::1] points, const double[::1] weights,
                const double[:, ::1] table, double inv_dr, double dt,
                Py_ssize_t start, Py_ssize_t stop, const double[:, ::1] new_block):
    """Pair-sum change when points[start:stop] are replaced by new_block."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t n_r = table.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc = 0.0, r_new, r_old
    cdef long misses = 0
    with nogil:
        # cross pairs: one end inside the block, counted twice in the full sum
        for i in range(start, stop):
            for j in range(n):
                if start <= j < stop:
                    continue
                k = j - i if j > i else i - j
                r_new = _dist(new_block, i - start, points, j, d)
                r_old = _dist(points, i, points, j, d)
                acc += 2.0 * weights[i] * weights[j] * (
                    _lookup(table, k, r_new, inv_dr, n_r, &misses)
                    - _lookup(table, k, r_old, inv_dr, n_r, &misses))
        # pairs fully inside the block (diagonal terms cancel exactly)
        for i in range(start, stop):
            for j in range(i + 1, stop):
                r_new = _dist(new_block, i - start, new_block, j - start, d)
                r_old = _dist(points, i, points, j, d)
                acc += 2.0 * weights[i] * weights[j] * (
                    _lookup(table, j - i, r_new, inv_dr, n_r, &misses)
                    - _lookup(table, j - i, r_old, inv_dr, n_r, &misses))
    return acc * dt * dt, misses
