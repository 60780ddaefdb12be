# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython backend for the jump-process inner loop.

Must stay arithmetically identical to _jump_py.consume: same operations
in the same order per particle, so both backends produce bit-identical
trajectories from the same random blocks.
"""

from libc.math cimport floor, sqrt

import numpy as np


def consume(double[::1] x, double[::1] v, double[::1] t, char[::1] alive,
            double[:, ::1] E, double[:, ::1] U, double[:, ::1] Z,
            double t_end, double alpha, double[::1] Tg, double[::1] taug,
            long long[::1] counts):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t kblock = E.shape[1]
    cdef Py_ssize_t ng = Tg.shape[0]
    cdef Py_ssize_t ngt = taug.shape[0]
    cdef bint use_counts = counts.shape[0] == n
    cdef Py_ssize_t i, k, i0
    cdef double tj, xr, xm, s, w, Tloc
    for i in range(n):
        if not alive[i]:
            continue
        for k in range(kblock):
            tj = t[i] + E[i, k]
            if tj > t_end:
                xr = x[i] + v[i] * (t_end - t[i])
                x[i] = xr - floor(xr)
                t[i] = t_end
                alive[i] = 0
                break
            xm = x[i] + v[i] * E[i, k]
            x[i] = xm - floor(xm)
            t[i] = tj
            if use_counts:
                counts[i] += 1
            if U[i, k] < alpha:
                s = x[i] * ng
                i0 = <Py_ssize_t> floor(s)
                w = s - i0
                Tloc = Tg[i0 % ng] * (1.0 - w) + Tg[(i0 + 1) % ng] * w
            else:
                s = x[i] * ngt
                i0 = <Py_ssize_t> floor(s)
                w = s - i0
                Tloc = taug[i0 % ngt] * (1.0 - w) + taug[(i0 + 1) % ngt] * w
            v[i] = Z[i, k] * sqrt(Tloc)
