# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: cyclic Jacobi eigensolver and slice-wise matmul.

Both functions mirror ``sttgcn._kernels_py`` exactly in semantics.
"""
import numpy as np

from libc.math cimport fabs, sqrt


def jacobi_eigh(a_in, double tol=1e-15, int max_sweeps=60):
    cdef double[:, ::1] a = np.array(a_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = a.shape[0]
    v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double apq, app, aqq, theta, t, c, s, akp, akq, off, fro
    cdef int sweeps_done = 0

    fro = 0.0
    for p in range(n):
        for q in range(n):
            fro += a[p, q] * a[p, q]
    fro = sqrt(fro)

    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        off = sqrt(2.0 * off)
        if off <= tol * fro:
            break
        sweeps_done += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    if k == p or k == q:
                        continue
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                    a[p, k] = a[k, p]
                    a[q, k] = a[k, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq

    w = np.empty(n, dtype=np.float64)
    for p in range(n):
        w[p] = a[p, p]
    return w, v_arr, sweeps_done


def _batch_matmul_f(const double[::1, :, :] a, const double[::1, :, :] b):
    # k innermost: Fortran-ordered operands stream contiguously
    cdef Py_ssize_t nk = a.shape[0], nd = a.shape[1], nt = a.shape[2]
    cdef Py_ssize_t nt2 = b.shape[2]
    out_arr = np.zeros((nk, nd, nt2), dtype=np.float64, order="F")
    cdef double[::1, :, :] out = out_arr
    cdef Py_ssize_t k, d, t, t2
    for t2 in range(nt2):
        for t in range(nt):
            for d in range(nd):
                for k in range(nk):
                    out[k, d, t2] += a[k, d, t] * b[k, t, t2]
    return out_arr


def _batch_matmul_c(const double[:, :, ::1] a, const double[:, :, ::1] b):
    # t2 innermost: C-ordered operands stream contiguously
    cdef Py_ssize_t nk = a.shape[0], nd = a.shape[1], nt = a.shape[2]
    cdef Py_ssize_t nt2 = b.shape[2]
    out_arr = np.zeros((nk, nd, nt2), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t k, d, t, t2
    cdef double aval
    cdef double *orow
    cdef const double *brow
    if nk == 0 or nd == 0 or nt == 0 or nt2 == 0:
        return out_arr
    with nogil:
        for k in range(nk):
            for d in range(nd):
                orow = &out[k, d, 0]
                for t in range(nt):
                    aval = a[k, d, t]
                    brow = &b[k, t, 0]
                    for t2 in range(nt2):
                        orow[t2] += aval * brow[t2]
    return out_arr


def batch_matmul(a_in, b_in):
    a = np.asarray(a_in, dtype=np.float64)
    b = np.asarray(b_in, dtype=np.float64)
    if a.flags.f_contiguous and not a.flags.c_contiguous:
        return _batch_matmul_f(a, np.asfortranarray(b))
    return _batch_matmul_c(np.ascontiguousarray(a), np.ascontiguousarray(b))
