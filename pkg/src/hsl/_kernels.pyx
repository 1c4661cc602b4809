# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_fallback.py`` (same semantics)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, NAN
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t SEED_SALT = 0x632BE59BD9B4E019ULL
cdef double TWO_NEG53 = 1.1102230246251565e-16
cdef int MODE_BITS = 16
cdef int ATTEMPT_BITS = 8


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = z ^ (z >> 30)
    z = z * 0xBF58476D1CE4E5B9ULL
    z = z ^ (z >> 27)
    z = z * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _key(uint64_t k0, int64_t path) noexcept nogil:
    return _mix(k0 ^ ((<uint64_t>path + 1) * GOLDEN))


cdef inline double _uniform(uint64_t key, uint64_t ctr) noexcept nogil:
    cdef uint64_t bits = _mix(key + (ctr + 1) * GOLDEN)
    return (<double>(bits >> 11) + 0.5) * TWO_NEG53


cdef inline void _normal_pair(uint64_t key, uint64_t block, uint64_t pair,
                              double* c, double* s) noexcept nogil:
    cdef uint64_t stem = ((block << MODE_BITS) + pair) << ATTEMPT_BITS
    cdef uint64_t attempt, ctr
    cdef double u, v, r2, f
    for attempt in range(1 << ATTEMPT_BITS):
        ctr = (stem + attempt) * 2
        u = 2.0 * _uniform(key, ctr) - 1.0
        v = 2.0 * _uniform(key, ctr + 1) - 1.0
        r2 = u * u + v * v
        if r2 < 1.0 and r2 > 0.0:
            f = sqrt(-2.0 * log(r2) / r2)
            c[0] = u * f
            s[0] = v * f
            return
    c[0] = NAN
    s[0] = NAN


cdef uint64_t _seed_key(object seed):
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    return _mix(s * GOLDEN + SEED_SALT)


def counter_normals(seed, paths, long block, Py_ssize_t D):
    cdef int64_t[::1] pv = np.ascontiguousarray(paths, dtype=np.int64)
    cdef Py_ssize_t n = pv.shape[0], i, m
    cdef Py_ssize_t npairs = (D + 1) // 2
    out = np.empty((n, 2 * npairs), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef uint64_t k0 = _seed_key(seed), key
    with nogil:
        for i in range(n):
            key = _key(k0, pv[i])
            for m in range(npairs):
                _normal_pair(key, <uint64_t>block, <uint64_t>m, &o[i, 2 * m], &o[i, 2 * m + 1])
    return out[:, :D]


def em_linear(double[:, ::1] z, const double[:, ::1] mux, const double[:, ::1] cy,
              const double[::1] sig, double h, seed, paths, long block0):
    cdef int64_t[::1] pv = np.ascontiguousarray(paths, dtype=np.int64)
    cdef Py_ssize_t n = z.shape[0], D = z.shape[1], steps = mux.shape[0]
    cdef Py_ssize_t i, m, k, j0, j1
    cdef uint64_t k0 = _seed_key(seed), key
    cdef double z0, z1, xc, xs
    cdef bint has_second
    if pv.shape[0] != n or mux.shape[1] != D or cy.shape[0] != steps or cy.shape[1] != D \
            or sig.shape[0] != D:
        raise ValueError("shape mismatch in em_linear")
    with nogil:
        for i in range(n):
            key = _key(k0, pv[i])
            for m in range((D + 1) // 2):
                j0 = 2 * m
                j1 = j0 + 1
                has_second = j1 < D
                z0 = z[i, j0]
                z1 = z[i, j1] if has_second else 0.0
                for k in range(steps):
                    _normal_pair(key, <uint64_t>(block0 + k), <uint64_t>m, &xc, &xs)
                    z0 = z0 + ((mux[k, j0] * z0 + cy[k, j0]) * h + sig[j0] * xc)
                    if has_second:
                        z1 = z1 + ((mux[k, j1] * z1 + cy[k, j1]) * h + sig[j1] * xs)
                z[i, j0] = z0
                if has_second:
                    z[i, j1] = z1
    return np.asarray(z)
