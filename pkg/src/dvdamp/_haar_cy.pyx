# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Haar kernels. Same contract as _haar_py (see its docstring)."""

import numpy as np

cimport numpy as cnp

cdef double ISQRT2 = 0.7071067811865476


def forward_level(cnp.complex128_t[:, :] block):
    cdef Py_ssize_t h = block.shape[0] // 2
    cdef Py_ssize_t w = block.shape[1] // 2
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out_arr = np.empty(
        (2 * h, 2 * w), dtype=np.complex128)
    cdef cnp.complex128_t[:, :] out = out_arr
    cdef Py_ssize_t i, j
    cdef double complex a, b, c, d, lo0, lo1, hi0, hi1
    for i in range(h):
        for j in range(w):
            a = block[2 * i, 2 * j]
            b = block[2 * i, 2 * j + 1]
            c = block[2 * i + 1, 2 * j]
            d = block[2 * i + 1, 2 * j + 1]
            lo0 = (a + b) * ISQRT2
            lo1 = (c + d) * ISQRT2
            hi0 = (a - b) * ISQRT2
            hi1 = (c - d) * ISQRT2
            out[i, j] = (lo0 + lo1) * ISQRT2
            out[h + i, j] = (lo0 - lo1) * ISQRT2
            out[i, w + j] = (hi0 + hi1) * ISQRT2
            out[h + i, w + j] = (hi0 - hi1) * ISQRT2
    return out_arr


def inverse_level(cnp.complex128_t[:, :] block):
    cdef Py_ssize_t h = block.shape[0] // 2
    cdef Py_ssize_t w = block.shape[1] // 2
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out_arr = np.empty(
        (2 * h, 2 * w), dtype=np.complex128)
    cdef cnp.complex128_t[:, :] out = out_arr
    cdef Py_ssize_t i, j
    cdef double complex ll, lh, hl, hh, lo0, lo1, hi0, hi1
    for i in range(h):
        for j in range(w):
            ll = block[i, j]
            lh = block[i, w + j]
            hl = block[h + i, j]
            hh = block[h + i, w + j]
            lo0 = (ll + hl) * ISQRT2
            lo1 = (ll - hl) * ISQRT2
            hi0 = (lh + hh) * ISQRT2
            hi1 = (lh - hh) * ISQRT2
            out[2 * i, 2 * j] = (lo0 + hi0) * ISQRT2
            out[2 * i, 2 * j + 1] = (lo0 - hi0) * ISQRT2
            out[2 * i + 1, 2 * j] = (lo1 + hi1) * ISQRT2
            out[2 * i + 1, 2 * j + 1] = (lo1 - hi1) * ISQRT2
    return out_arr
