# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; see _pykernels for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def mul_trunc(const double[::1] a, const double[::1] b,
              const cnp.int32_t[::1] ia, const cnp.int32_t[::1] ib,
              const cnp.int32_t[::1] ik, Py_ssize_t n_out):
    cdef Py_ssize_t p, npairs = ia.shape[0]
    cdef double x
    out = np.zeros(n_out, dtype=np.float64)
    cdef double[::1] o = out
    for p in range(npairs):
        x = a[ia[p]]
        if x != 0.0:
            o[ik[p]] += x * b[ib[p]]
    return out


def monomial_values(const cnp.int32_t[:, ::1] exps, const double[:, ::1] pts):
    cdef Py_ssize_t npts = pts.shape[0], nv = pts.shape[1], nm = exps.shape[0]
    cdef Py_ssize_t i, k, j
    cdef int e, t
    cdef double acc, base
    out = np.empty((npts, nm), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(npts):
        for k in range(nm):
            acc = 1.0
            for j in range(nv):
                e = exps[k, j]
                base = pts[i, j]
                for t in range(e):
                    acc *= base
            o[i, k] = acc
    return out


def track(const double[:, ::1] coeffs, const cnp.int32_t[:, ::1] exps,
          const double[:, ::1] start, Py_ssize_t turns, double escape):
    """Iterate a polynomial map; returns (final points, survived turn counts)."""
    cdef Py_ssize_t npts = start.shape[0], nv = start.shape[1], nm = exps.shape[0]
    cdef Py_ssize_t i, k, j, t, c
    cdef int e, r
    cdef double acc, base
    pts = np.array(start, dtype=np.float64, copy=True)
    cdef double[:, ::1] z = pts
    survived = np.zeros(npts, dtype=np.int64)
    cdef cnp.int64_t[::1] s = survived
    cdef double[::1] mono = np.empty(nm, dtype=np.float64)
    cdef double[::1] nxt = np.empty(nv, dtype=np.float64)
    cdef bint alive
    for i in range(npts):
        alive = True
        for t in range(turns):
            for k in range(nm):
                acc = 1.0
                for j in range(nv):
                    e = exps[k, j]
                    base = z[i, j]
                    for r in range(e):
                        acc *= base
                mono[k] = acc
            for c in range(nv):
                acc = 0.0
                for k in range(nm):
                    acc += coeffs[c, k] * mono[k]
                nxt[c] = acc
            for c in range(nv):
                z[i, c] = nxt[c]
                if not fabs(nxt[c]) <= escape:
                    alive = False
            if not alive:
                break
            s[i] = t + 1
    return pts, survived
