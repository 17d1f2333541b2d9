# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled assembly kernels; same signatures as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, cos, sin, atan2, fmod, M_PI, INFINITY

cnp.import_array()

cdef int _NQUAD = 48


def pair_kernel_matrix(nodes, weights, double exponent):
    cdef double[:, ::1] x = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j, k
    out_arr = np.zeros((n, n))
    cdef double[:, ::1] out = out_arr
    cdef double r2, diff, val
    for i in range(n):
        for j in range(i + 1, n):
            r2 = 0.0
            for k in range(d):
                diff = x[i, k] - x[j, k]
                r2 += diff * diff
            val = pow(r2, -0.5 * exponent)
            out[i, j] = w[j] * val
            out[j, i] = w[i] * val
    return out_arr


def ghost_tail(nodes, ghosts, double ghost_weight, double exponent):
    cdef double[:, ::1] x = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef double[:, ::1] g = np.ascontiguousarray(ghosts, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], m = g.shape[0], d = x.shape[1], i, j, k
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef double r2, diff, acc
    for i in range(n):
        acc = 0.0
        for j in range(m):
            r2 = 0.0
            for k in range(d):
                diff = x[i, k] - g[j, k]
                r2 += diff * diff
            acc += pow(r2, -0.5 * exponent)
        out[i] = ghost_weight * acc
    return out_arr


cdef inline double _ray_exit(double px, double py, double th) nogil:
    cdef double c = cos(th), s = sin(th), rx = INFINITY, ry = INFINITY
    if c > 0:
        rx = (1.0 - px) / c
    elif c < 0:
        rx = -px / c
    if s > 0:
        ry = (1.0 - py) / s
    elif s < 0:
        ry = -py / s
    return rx if rx < ry else ry


def exterior_tail_square(nodes, double s, int nquad=_NQUAD):
    gx_arr, gw_arr = np.polynomial.legendre.leggauss(nquad)
    cdef double[::1] gx = gx_arr, gw = gw_arr
    cdef double[:, ::1] x = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], i, p, q, a_idx
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double px, py, a, b, th, total, tmp
    cdef double corners[5]
    for i in range(n):
        px = x[i, 0]
        py = x[i, 1]
        corners[0] = fmod(atan2(-py, -px) + 2 * M_PI, 2 * M_PI)
        corners[1] = fmod(atan2(-py, 1 - px) + 2 * M_PI, 2 * M_PI)
        corners[2] = fmod(atan2(1 - py, 1 - px) + 2 * M_PI, 2 * M_PI)
        corners[3] = fmod(atan2(1 - py, -px) + 2 * M_PI, 2 * M_PI)
        for p in range(1, 4):
            tmp = corners[p]
            a_idx = p - 1
            while a_idx >= 0 and corners[a_idx] > tmp:
                corners[a_idx + 1] = corners[a_idx]
                a_idx -= 1
            corners[a_idx + 1] = tmp
        corners[4] = corners[0] + 2 * M_PI
        total = 0.0
        for p in range(4):
            a = corners[p]
            b = corners[p + 1]
            for q in range(nquad):
                th = 0.5 * (b - a) * gx[q] + 0.5 * (b + a)
                total += 0.5 * (b - a) * gw[q] * pow(_ray_exit(px, py, th), -2.0 * s)
        out[i] = total / (2.0 * s)
    return out_arr
