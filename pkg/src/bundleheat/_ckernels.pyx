# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path-stepping kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin

cnp.import_array()


def reflect_1d(r, incr, unif, double dt, bint exact):
    cdef const double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(incr, dtype=np.float64)
    cdef const double[::1] uv = np.ascontiguousarray(unif, dtype=np.float64)
    cdef Py_ssize_t n = rv.shape[0], i
    out_r = np.empty(n)
    out_l = np.empty(n)
    cdef double[::1] ro = out_r
    cdef double[::1] lo = out_l
    cdef double b, low, dl
    with nogil:
        for i in range(n):
            b = bv[i]
            if exact:
                low = 0.5 * (b - sqrt(b * b - 2.0 * dt * log(uv[i])))
            else:
                low = b if b < 0.0 else 0.0
            dl = -rv[i] - low
            if dl < 0.0:
                dl = 0.0
            lo[i] = dl
            ro[i] = rv[i] + b + dl
    return out_r, out_l


cdef inline void _transport_one(const double* x, const double* y, const double* E, double* out) noexcept nogil:
    # E and out are 3x2 row-major: E[a*2 + i]
    cdef double denom = 1.0 + x[0] * y[0] + x[1] * y[1] + x[2] * y[2]
    cdef double c, d, n1, n2
    cdef int a, i
    for i in range(2):
        c = (y[0] * E[i] + y[1] * E[2 + i] + y[2] * E[4 + i]) / denom
        for a in range(3):
            out[2 * a + i] = E[2 * a + i] - c * (x[a] + y[a])
    # project to the tangent plane at y, then Gram-Schmidt
    for i in range(2):
        d = y[0] * out[i] + y[1] * out[2 + i] + y[2] * out[4 + i]
        for a in range(3):
            out[2 * a + i] -= d * y[a]
    n1 = sqrt(out[0] * out[0] + out[2] * out[2] + out[4] * out[4])
    for a in range(3):
        out[2 * a] /= n1
    d = out[0] * out[1] + out[2] * out[3] + out[4] * out[5]
    for a in range(3):
        out[2 * a + 1] -= d * out[2 * a]
    n2 = sqrt(out[1] * out[1] + out[3] * out[3] + out[5] * out[5])
    for a in range(3):
        out[2 * a + 1] /= n2


def sphere_transport(x, x_new, E):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] yv = np.ascontiguousarray(x_new, dtype=np.float64)
    cdef const double[:, :, ::1] Ev = np.ascontiguousarray(E, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], p
    out = np.empty((n, 3, 2))
    cdef double[:, :, ::1] ov = out
    with nogil:
        for p in range(n):
            _transport_one(&xv[p, 0], &yv[p, 0], &Ev[p, 0, 0], &ov[p, 0, 0])
    return out


def sphere_step(x, E, db):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, :, ::1] Ev = np.ascontiguousarray(E, dtype=np.float64)
    cdef const double[:, ::1] dv = np.ascontiguousarray(db, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], p
    cdef int a
    cdef double v[3]
    cdef double s, cs, sn, nrm
    x_new = np.empty((n, 3))
    E_new = np.empty((n, 3, 2))
    cdef double[:, ::1] yv = x_new
    cdef double[:, :, ::1] ov = E_new
    with nogil:
        for p in range(n):
            for a in range(3):
                v[a] = Ev[p, a, 0] * dv[p, 0] + Ev[p, a, 1] * dv[p, 1]
            s = sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            cs = cos(s)
            sn = sin(s) / s if s > 0.0 else 0.0
            for a in range(3):
                yv[p, a] = cs * xv[p, a] + sn * v[a]
            nrm = sqrt(yv[p, 0] * yv[p, 0] + yv[p, 1] * yv[p, 1] + yv[p, 2] * yv[p, 2])
            for a in range(3):
                yv[p, a] /= nrm
            _transport_one(&xv[p, 0], &yv[p, 0], &Ev[p, 0, 0], &ov[p, 0, 0])
    return x_new, E_new


def bin_accumulate(index, weights, Py_ssize_t nbins):
    cdef const cnp.int64_t[::1] iv = np.ascontiguousarray(index, dtype=np.int64)
    cdef const double[:, ::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = iv.shape[0], K = wv.shape[1], p, k, b
    out = np.zeros((nbins, K))
    cdef double[:, ::1] ov = out
    with nogil:
        for p in range(n):
            b = iv[p]
            if b < 0:
                continue
            for k in range(K):
                ov[b, k] += wv[p, k]
    return out
