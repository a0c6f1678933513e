# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled minimum-cost assignment (shortest augmenting path with potentials)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def hungarian(cost):
    """Row -> column assignment minimising the total cost of a square matrix."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.zeros(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.zeros(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] minv = np.empty(n + 1)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] p = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] way = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] used = np.zeros(n + 1, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    for j in range(1, n + 1):
        out[p[j] - 1] = j - 1
    return out
