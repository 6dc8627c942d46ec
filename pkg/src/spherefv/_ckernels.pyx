# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, atan2

cnp.import_array()


cdef inline void _cross(double ax, double ay, double az,
                        double bx, double by, double bz,
                        double* out) noexcept nogil:
    out[0] = ay * bz - az * by
    out[1] = az * bx - ax * bz
    out[2] = ax * by - ay * bx


cdef void _circumcenters(const double[:, ::1] x, const cnp.int64_t[:, ::1] tris,
                         double[:, ::1] q, double[::1] r) noexcept nogil:
    cdef Py_ssize_t t, f = tris.shape[0]
    cdef cnp.int64_t ia, ib, ic
    cdef double n[3]
    cdef double c[3]
    cdef double nn, s
    for t in range(f):
        ia = tris[t, 0]
        ib = tris[t, 1]
        ic = tris[t, 2]
        _cross(x[ib, 0] - x[ia, 0], x[ib, 1] - x[ia, 1], x[ib, 2] - x[ia, 2],
               x[ic, 0] - x[ia, 0], x[ic, 1] - x[ia, 1], x[ic, 2] - x[ia, 2], n)
        nn = sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
        s = (n[0] * (x[ia, 0] + x[ib, 0] + x[ic, 0])
             + n[1] * (x[ia, 1] + x[ib, 1] + x[ic, 1])
             + n[2] * (x[ia, 2] + x[ib, 2] + x[ic, 2]))
        if s < 0.0:
            nn = -nn
        q[t, 0] = n[0] / nn
        q[t, 1] = n[1] / nn
        q[t, 2] = n[2] / nn
        _cross(q[t, 0], q[t, 1], q[t, 2], x[ia, 0], x[ia, 1], x[ia, 2], c)
        r[t] = atan2(sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]),
                     q[t, 0] * x[ia, 0] + q[t, 1] * x[ia, 1] + q[t, 2] * x[ia, 2])


def circumcenters(x, tris):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] tv = np.ascontiguousarray(tris, dtype=np.int64)
    q = np.empty((tv.shape[0], 3))
    r = np.empty(tv.shape[0])
    cdef double[:, ::1] qv = q
    cdef double[::1] rv = r
    with nogil:
        _circumcenters(xv, tv, qv, rv)
    return q, r


def dual_measures(x, tris, edges, edge_tris):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] tv = np.ascontiguousarray(tris, dtype=np.int64)
    cdef const cnp.int64_t[:, ::1] ev = np.ascontiguousarray(edges, dtype=np.int64)
    cdef const cnp.int64_t[:, ::1] etv = np.ascontiguousarray(edge_tris, dtype=np.int64)
    cdef Py_ssize_t nv = xv.shape[0], ne = ev.shape[0], e, k
    q = np.empty((tv.shape[0], 3))
    r = np.empty(tv.shape[0])
    areas = np.zeros(nv)
    moments = np.zeros((nv, 3))
    cdef double[:, ::1] qv = q
    cdef double[::1] rv = r
    cdef double[::1] av = areas
    cdef double[:, ::1] mv = moments
    cdef cnp.int64_t i, j, t1, t2
    cdef double cr[3]
    cdef double s, theta, w, q12, trip, den
    with nogil:
        _circumcenters(xv, tv, qv, rv)
        for e in range(ne):
            i = ev[e, 0]
            j = ev[e, 1]
            t1 = etv[e, 0]
            t2 = etv[e, 1]
            _cross(qv[t2, 0], qv[t2, 1], qv[t2, 2], qv[t1, 0], qv[t1, 1], qv[t1, 2], cr)
            s = sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2])
            q12 = qv[t1, 0] * qv[t2, 0] + qv[t1, 1] * qv[t2, 1] + qv[t1, 2] * qv[t2, 2]
            if s > 0.0:
                theta = atan2(s, q12)
                w = 0.5 * theta / s
                for k in range(3):
                    mv[i, k] += w * cr[k]
                    mv[j, k] -= w * cr[k]
            trip = xv[i, 0] * cr[0] + xv[i, 1] * cr[1] + xv[i, 2] * cr[2]
            den = 1.0 + q12
            for k in range(3):
                den += xv[i, k] * (qv[t2, k] + qv[t1, k])
            av[i] += 2.0 * atan2(trip, den)
            trip = -(xv[j, 0] * cr[0] + xv[j, 1] * cr[1] + xv[j, 2] * cr[2])
            den = 1.0 + q12
            for k in range(3):
                den += xv[j, k] * (qv[t1, k] + qv[t2, k])
            av[j] += 2.0 * atan2(trip, den)
    return q, r, areas, moments


def lloyd_step(x, tris, edges, edge_tris):
    _, _, areas, moments = dual_measures(x, tris, edges, edge_tris)
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] mv = moments
    cdef double[::1] av = areas
    cdef Py_ssize_t n = xv.shape[0], i
    x_new = np.empty((n, 3))
    cdef double[:, ::1] yv = x_new
    cdef double mn, energy = 0.0, move = 0.0, d
    cdef double c[3]
    cdef bint degenerate = False
    with nogil:
        for i in range(n):
            mn = sqrt(mv[i, 0] * mv[i, 0] + mv[i, 1] * mv[i, 1] + mv[i, 2] * mv[i, 2])
            if mn == 0.0:
                degenerate = True
                break
            yv[i, 0] = mv[i, 0] / mn
            yv[i, 1] = mv[i, 1] / mn
            yv[i, 2] = mv[i, 2] / mn
            energy += 2.0 * av[i] - 2.0 * (xv[i, 0] * mv[i, 0] + xv[i, 1] * mv[i, 1] + xv[i, 2] * mv[i, 2])
            _cross(xv[i, 0], xv[i, 1], xv[i, 2], yv[i, 0], yv[i, 1], yv[i, 2], c)
            d = atan2(sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]),
                      xv[i, 0] * yv[i, 0] + xv[i, 1] * yv[i, 1] + xv[i, 2] * yv[i, 2])
            if d > move:
                move = d
    if degenerate:
        raise ZeroDivisionError("centroid undefined")
    return x_new, move, energy
