# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the sequential loops in ``_pykernels``."""

import numpy as np


def prefix_sum(double[::1] a):
    cdef Py_ssize_t n = a.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double s = 0.0, comp = 0.0, t, v
    for i in range(n):
        v = a[i]
        t = s + v
        if (s if s >= 0 else -s) >= (v if v >= 0 else -v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        o[i] = s + comp
    return out


def suffix_sum(double[::1] a):
    cdef Py_ssize_t n = a.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double s = 0.0, comp = 0.0, t, v
    for i in range(n - 1, -1, -1):
        v = a[i]
        t = s + v
        if (s if s >= 0 else -s) >= (v if v >= 0 else -v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        o[i] = s + comp
    return out


def total_sum(double[::1] a):
    cdef Py_ssize_t n = a.shape[0], i
    cdef double s = 0.0, comp = 0.0, t, v
    for i in range(n):
        v = a[i]
        t = s + v
        if (s if s >= 0 else -s) >= (v if v >= 0 else -v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
    return s + comp


def leindler_recurrence(double[::1] lam, double[::1] tail_next, double t):
    cdef Py_ssize_t n = lam.shape[0], i
    out = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] w = out
    cdef double s = 0.0, comp = 0.0, u, v
    w[0] = 1.0
    for i in range(n):
        v = lam[i] * w[i]
        u = s + v
        if (s if s >= 0 else -s) >= (v if v >= 0 else -v):
            comp += (s - u) + v
        else:
            comp += (v - u) + s
        s = u
        w[i + 1] = t * (s + comp) / tail_next[i]
    return out
