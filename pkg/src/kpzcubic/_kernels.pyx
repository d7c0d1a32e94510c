# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in kpzcubic."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def weighted_kernel(nodes, weights, f, g):
    """Matrix [f(u_a).g(u_b) / (u_a - u_b) * w_b] with zero diagonal."""
    cdef double complex[::1] u = np.ascontiguousarray(nodes, dtype=np.complex128)
    cdef double complex[::1] w = np.ascontiguousarray(weights, dtype=np.complex128)
    cdef double complex[:, ::1] F = np.ascontiguousarray(f, dtype=np.complex128)
    cdef double complex[:, ::1] G = np.ascontiguousarray(g, dtype=np.complex128)
    cdef Py_ssize_t n = u.shape[0], r = F.shape[1]
    out = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] H = out
    cdef Py_ssize_t a, b, k
    cdef double complex acc
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            acc = 0
            for k in range(r):
                acc = acc + F[a, k] * G[b, k]
            if acc != 0:
                H[a, b] = acc / (u[a] - u[b]) * w[b]
    return out


def cauchy_sum(z, y, vals):
    """sum_k vals_k / (i*y_k - z) for each z (trapezoid body, no step factor)."""
    zarr = np.asarray(z, dtype=np.complex128)
    shape = zarr.shape
    cdef double complex[::1] zz = np.ascontiguousarray(zarr.ravel())
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef double complex[::1] vv = np.ascontiguousarray(vals, dtype=np.complex128)
    cdef Py_ssize_t nz = zz.shape[0], ny = yy.shape[0], a, k
    res = np.empty(nz, dtype=np.complex128)
    cdef double complex[::1] out = res
    cdef double complex acc, zc
    for a in range(nz):
        zc = zz[a]
        acc = 0
        for k in range(ny):
            acc = acc + vv[k] / (1j * yy[k] - zc)
        out[a] = acc
    return res.reshape(shape)
