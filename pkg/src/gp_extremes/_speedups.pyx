# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: Philox4x32-10 streams, row argmax, row soft-max.

Every function here has a numpy twin in ``_fallback.py`` with the same
signature and semantics; ``backend.py`` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, exp, M_PI
from libc.stdint cimport uint32_t, uint64_t, int64_t

cnp.import_array()

cdef extern from "math.h" nogil:
    void sincos(double x, double* s, double* c)

cdef extern from *:
    """
    #define PHILOX_M0 0xD2511F53u
    #define PHILOX_M1 0xCD9E8D57u
    #define PHILOX_W0 0x9E3779B9u
    #define PHILOX_W1 0xBB67AE85u
    """
    const uint32_t PHILOX_M0
    const uint32_t PHILOX_M1
    const uint32_t PHILOX_W0
    const uint32_t PHILOX_W1
cdef double TWO_POW_M53 = 1.0 / 9007199254740992.0


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint32_t x0 = c[0], x1 = c[1], x2 = c[2], x3 = c[3], y0, y2
    cdef uint64_t p0, p1
    cdef int r
    for r in range(10):
        p0 = <uint64_t>PHILOX_M0 * x0
        p1 = <uint64_t>PHILOX_M1 * x2
        y0 = <uint32_t>(p1 >> 32) ^ x1 ^ k0
        y2 = <uint32_t>(p0 >> 32) ^ x3 ^ k1
        x1 = <uint32_t>p1
        x3 = <uint32_t>p0
        x0 = y0
        x2 = y2
        k0 = k0 + PHILOX_W0
        k1 = k1 + PHILOX_W1
    c[0] = x0
    c[1] = x1
    c[2] = x2
    c[3] = x3


cdef inline double _u53(uint32_t a, uint32_t b) noexcept nogil:
    return ((a >> 5) * 67108864.0 + (b >> 6)) * TWO_POW_M53


def philox4x32(counter, key):
    """Single Philox4x32-10 block; ``counter`` has 4 words, ``key`` 2."""
    cdef uint32_t c[4]
    for i in range(4):
        c[i] = <uint32_t>(int(counter[i]) & 0xFFFFFFFF)
    _philox(c, <uint32_t>(int(key[0]) & 0xFFFFFFFF), <uint32_t>(int(key[1]) & 0xFFFFFFFF))
    return (c[0], c[1], c[2], c[3])


def uniforms(uint64_t seed, int64_t[::1] ids, uint32_t tag, Py_ssize_t count):
    cdef Py_ssize_t nrow = ids.shape[0], i, j, nblk = (count + 1) // 2
    cdef cnp.ndarray[double, ndim=2] out_arr = np.empty((nrow, count), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef uint32_t k0 = <uint32_t>seed, k1 = <uint32_t>(seed >> 32)
    cdef uint32_t c[4]
    cdef uint64_t rid
    with nogil:
        for i in range(nrow):
            rid = <uint64_t>ids[i]
            for j in range(nblk):
                c[0] = <uint32_t>j
                c[1] = <uint32_t>rid
                c[2] = <uint32_t>(rid >> 32)
                c[3] = tag
                _philox(c, k0, k1)
                out[i, 2 * j] = _u53(c[0], c[1])
                if 2 * j + 1 < count:
                    out[i, 2 * j + 1] = _u53(c[2], c[3])
    return out_arr


def normals(uint64_t seed, int64_t[::1] ids, uint32_t tag, Py_ssize_t count):
    cdef Py_ssize_t nrow = ids.shape[0], i, j, nblk = (count + 1) // 2
    cdef cnp.ndarray[double, ndim=2] out_arr = np.empty((nrow, count), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef uint32_t k0 = <uint32_t>seed, k1 = <uint32_t>(seed >> 32)
    cdef uint32_t c[4]
    cdef uint64_t rid
    cdef double ua, ub, rad, sn, cs
    with nogil:
        for i in range(nrow):
            rid = <uint64_t>ids[i]
            for j in range(nblk):
                c[0] = <uint32_t>j
                c[1] = <uint32_t>rid
                c[2] = <uint32_t>(rid >> 32)
                c[3] = tag
                _philox(c, k0, k1)
                ua = _u53(c[0], c[1])
                ub = _u53(c[2], c[3])
                rad = sqrt(-2.0 * log(1.0 - ua))
                sincos(2.0 * M_PI * ub, &sn, &cs)
                out[i, 2 * j] = rad * cs
                if 2 * j + 1 < count:
                    out[i, 2 * j + 1] = rad * sn
    return out_arr


def argmax_rows(const double[:, :] values):
    """Row maxima, lowest maximising index and a tie flag, one pass per row."""
    cdef Py_ssize_t nrow = values.shape[0], n = values.shape[1], i, j, best
    cdef double m, v
    cdef bint tie
    m_arr = np.empty(nrow, dtype=np.float64)
    i_arr = np.empty(nrow, dtype=np.int64)
    t_arr = np.empty(nrow, dtype=np.bool_)
    cdef double[::1] mv = m_arr
    cdef int64_t[::1] iv = i_arr
    cdef cnp.npy_bool[::1] tv = t_arr
    with nogil:
        for i in range(nrow):
            m = values[i, 0]
            best = 0
            tie = False
            for j in range(1, n):
                v = values[i, j]
                if v > m:
                    m = v
                    best = j
                    tie = False
                elif v == m:
                    tie = True
            mv[i] = m
            iv[i] = best
            tv[i] = tie
    return m_arr, i_arr, t_arr


def softmax_rows(const double[:, :] values, double beta):
    """Stabilised ``beta^-1 log sum exp(beta x)`` and its gradient per row."""
    cdef Py_ssize_t nrow = values.shape[0], n = values.shape[1], i, j
    cdef double m, s, e
    f_arr = np.empty(nrow, dtype=np.float64)
    g_arr = np.empty((nrow, n), dtype=np.float64)
    cdef double[::1] fv = f_arr
    cdef double[:, ::1] gv = g_arr
    with nogil:
        for i in range(nrow):
            m = values[i, 0]
            for j in range(1, n):
                if values[i, j] > m:
                    m = values[i, j]
            s = 0.0
            for j in range(n):
                e = exp(beta * (values[i, j] - m))
                gv[i, j] = e
                s = s + e
            for j in range(n):
                gv[i, j] = gv[i, j] / s
            fv[i] = m + log(s) / beta
    return f_arr, g_arr
