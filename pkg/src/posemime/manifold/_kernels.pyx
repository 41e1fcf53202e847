# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for batched product-manifold operations.

Signature-compatible with ``_kernels_py``; see that module for the factor
table convention and the intrinsic-coordinate (Householder basis) scheme.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, sin, sqrt

cnp.import_array()

EUCLIDEAN = 0
SPHERE = 1

cdef double ANTIPODAL_COS = -1.0 + 1e-9
cdef double TINY_ANGLE = 1e-12
cdef double TINY_HOUSE = 1e-30


cdef inline double _clip1(double x) nogil:
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


cdef inline void _house_apply(const double* p, int m, double nu2,
                              const double* w_in, double* w_out) nogil:
    # w_out = H w_in with H = I - 2uu^T/|u|^2, u = p - e_m; identity when u ~ 0
    cdef int j
    cdef double uw = 0.0
    if nu2 < TINY_HOUSE:
        for j in range(m):
            w_out[j] = w_in[j]
        return
    for j in range(m - 1):
        uw += p[j] * w_in[j]
    uw += (p[m - 1] - 1.0) * w_in[m - 1]
    uw *= 2.0 / nu2
    for j in range(m - 1):
        w_out[j] = w_in[j] - uw * p[j]
    w_out[m - 1] = w_in[m - 1] - uw * (p[m - 1] - 1.0)


cdef inline double _house_nu2(const double* p, int m) nogil:
    cdef int j
    cdef double nu2 = 0.0
    for j in range(m - 1):
        nu2 += p[j] * p[j]
    nu2 += (p[m - 1] - 1.0) * (p[m - 1] - 1.0)
    return nu2


def log_many(int[::1] kinds, int[::1] e_off, int[::1] e_dim,
             int[::1] t_off, int[::1] t_dim,
             double[::1] base, double[:, ::1] pts, double[:, ::1] out):
    cdef int nf = kinds.shape[0]
    cdef Py_ssize_t n = pts.shape[0]
    cdef int f, eo, ed, to, td, j
    cdef Py_ssize_t i
    cdef double c, s2, s, theta, scale, nu2
    cdef double wbuf[64]
    cdef double hbuf[64]
    for f in range(nf):
        eo = e_off[f]; ed = e_dim[f]; to = t_off[f]; td = t_dim[f]
        if kinds[f] == EUCLIDEAN:
            for i in range(n):
                for j in range(td):
                    out[i, to + j] = pts[i, eo + j] - base[eo + j]
            continue
        nu2 = _house_nu2(&base[eo], ed)
        for i in range(n):
            c = 0.0
            for j in range(ed):
                c += pts[i, eo + j] * base[eo + j]
            c = _clip1(c)
            if c <= ANTIPODAL_COS:
                return i * nf + f
            s2 = 0.0
            for j in range(ed):
                wbuf[j] = pts[i, eo + j] - c * base[eo + j]
                s2 += wbuf[j] * wbuf[j]
            s = sqrt(s2)
            theta = atan2(s, c)
            if theta < TINY_ANGLE:
                for j in range(td):
                    out[i, to + j] = 0.0
                continue
            scale = theta / s
            for j in range(ed):
                wbuf[j] *= scale
            _house_apply(&base[eo], ed, nu2, wbuf, hbuf)
            for j in range(td):
                out[i, to + j] = hbuf[j]
    return -1


def exp_many(int[::1] kinds, int[::1] e_off, int[::1] e_dim,
             int[::1] t_off, int[::1] t_dim,
             double[::1] base, double[:, ::1] tans, double[:, ::1] out):
    cdef int nf = kinds.shape[0]
    cdef Py_ssize_t n = tans.shape[0]
    cdef int f, eo, ed, to, td, j
    cdef Py_ssize_t i
    cdef double theta2, theta, ct, st, nrm, nu2
    cdef double cbuf[64]
    cdef double wbuf[64]
    for f in range(nf):
        eo = e_off[f]; ed = e_dim[f]; to = t_off[f]; td = t_dim[f]
        if kinds[f] == EUCLIDEAN:
            for i in range(n):
                for j in range(ed):
                    out[i, eo + j] = base[eo + j] + tans[i, to + j]
            continue
        nu2 = _house_nu2(&base[eo], ed)
        for i in range(n):
            theta2 = 0.0
            for j in range(td):
                cbuf[j] = tans[i, to + j]
                theta2 += cbuf[j] * cbuf[j]
            cbuf[td] = 0.0
            theta = sqrt(theta2)
            if theta < TINY_ANGLE:
                for j in range(ed):
                    out[i, eo + j] = base[eo + j]
                continue
            _house_apply(&base[eo], ed, nu2, cbuf, wbuf)
            ct = cos(theta)
            st = sin(theta) / theta
            nrm = 0.0
            for j in range(ed):
                wbuf[j] = ct * base[eo + j] + st * wbuf[j]
                nrm += wbuf[j] * wbuf[j]
            nrm = sqrt(nrm)
            for j in range(ed):
                out[i, eo + j] = wbuf[j] / nrm
    return None


def dist2_many(int[::1] kinds, int[::1] e_off, int[::1] e_dim,
               int[::1] t_off, int[::1] t_dim,
               double[::1] base, double[:, ::1] pts, double[::1] out):
    cdef int nf = kinds.shape[0]
    cdef Py_ssize_t n = pts.shape[0]
    cdef int f, eo, ed, j
    cdef Py_ssize_t i
    cdef double c, s2, d, theta
    for i in range(n):
        out[i] = 0.0
    for f in range(nf):
        eo = e_off[f]; ed = e_dim[f]
        if kinds[f] == EUCLIDEAN:
            for i in range(n):
                for j in range(ed):
                    d = pts[i, eo + j] - base[eo + j]
                    out[i] += d * d
            continue
        for i in range(n):
            c = 0.0
            for j in range(ed):
                c += pts[i, eo + j] * base[eo + j]
            c = _clip1(c)
            if c <= ANTIPODAL_COS:
                return i * nf + f
            s2 = 0.0
            for j in range(ed):
                d = pts[i, eo + j] - c * base[eo + j]
                s2 += d * d
            theta = atan2(sqrt(s2), c)
            out[i] += theta * theta
    return -1


def transport_many(int[::1] kinds, int[::1] e_off, int[::1] e_dim,
                   int[::1] t_off, int[::1] t_dim,
                   double[::1] src, double[::1] dst,
                   double[:, ::1] tans, double[:, ::1] out):
    cdef int nf = kinds.shape[0]
    cdef Py_ssize_t n = tans.shape[0]
    cdef int f, eo, ed, to, td, j
    cdef Py_ssize_t i
    cdef double cpq, s2, s, theta, ct1, st, alpha, nu2p, nu2q
    cdef double cbuf[64]
    cdef double wbuf[64]
    cdef double hbuf[64]
    cdef double dbuf[64]
    for f in range(nf):
        eo = e_off[f]; ed = e_dim[f]; to = t_off[f]; td = t_dim[f]
        if kinds[f] == EUCLIDEAN:
            for i in range(n):
                for j in range(td):
                    out[i, to + j] = tans[i, to + j]
            continue
        cpq = 0.0
        for j in range(ed):
            cpq += src[eo + j] * dst[eo + j]
        cpq = _clip1(cpq)
        if cpq <= ANTIPODAL_COS:
            return f
        s2 = 0.0
        for j in range(ed):
            dbuf[j] = dst[eo + j] - cpq * src[eo + j]
            s2 += dbuf[j] * dbuf[j]
        s = sqrt(s2)
        theta = atan2(s, cpq)
        if theta >= TINY_ANGLE:
            for j in range(ed):
                dbuf[j] /= s
        nu2p = _house_nu2(&src[eo], ed)
        nu2q = _house_nu2(&dst[eo], ed)
        ct1 = cos(theta) - 1.0
        st = sin(theta)
        for i in range(n):
            for j in range(td):
                cbuf[j] = tans[i, to + j]
            cbuf[td] = 0.0
            _house_apply(&src[eo], ed, nu2p, cbuf, wbuf)
            if theta >= TINY_ANGLE:
                alpha = 0.0
                for j in range(ed):
                    alpha += wbuf[j] * dbuf[j]
                for j in range(ed):
                    wbuf[j] += alpha * (ct1 * dbuf[j] - st * src[eo + j])
            _house_apply(&dst[eo], ed, nu2q, wbuf, hbuf)
            for j in range(td):
                out[i, to + j] = hbuf[j]
    return -1
