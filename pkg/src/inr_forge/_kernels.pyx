# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: ordered matmul and the parallel-beam projector pair.

Both projector kernels walk the identical sample lattice, so the adjoint is
the exact transpose of the forward discretization.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def matmul_ordered(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], kk = a.shape[1], m = b.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] c = out
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(kk):
                acc = acc + a[i, k] * b[k, j]
            c[i, j] = acc
    return out


def radon_forward(const double[:, ::1] image, const double[::1] cos_t,
                  const double[::1] sin_t, const double[::1] offsets,
                  const double[::1] samples, double step):
    cdef Py_ssize_t n = image.shape[0]
    cdef Py_ssize_t na = cos_t.shape[0], nd = offsets.shape[0], ns = samples.shape[0]
    cdef Py_ssize_t a, d, q, i0, j0
    cdef double c, s, t, u, v, fu, fv, acc
    cdef double half_n = 0.5 * n
    out = np.zeros((na, nd), dtype=np.float64)
    cdef double[:, ::1] sino = out
    cdef const double* img = &image[0, 0]
    with nogil:
        for a in range(na):
            c = cos_t[a]
            s = sin_t[a]
            for d in range(nd):
                t = offsets[d]
                acc = 0.0
                for q in range(ns):
                    u = ((t * c - samples[q] * s) + 0.5) * n - 0.5
                    v = ((t * s + samples[q] * c) + 0.5) * n - 0.5
                    # shifted truncation equals floor for u, v > -2; anything
                    # lower fails the bounds test below
                    j0 = <Py_ssize_t>(u + 2.0) - 2
                    i0 = <Py_ssize_t>(v + 2.0) - 2
                    if i0 < -1 or j0 < -1 or i0 >= n or j0 >= n:
                        continue
                    fu = u - <double>j0
                    fv = v - <double>i0
                    if i0 >= 0:
                        if j0 >= 0:
                            acc = acc + (1.0 - fu) * (1.0 - fv) * img[i0 * n + j0]
                        if j0 + 1 < n:
                            acc = acc + fu * (1.0 - fv) * img[i0 * n + j0 + 1]
                    if i0 + 1 < n:
                        if j0 >= 0:
                            acc = acc + (1.0 - fu) * fv * img[(i0 + 1) * n + j0]
                        if j0 + 1 < n:
                            acc = acc + fu * fv * img[(i0 + 1) * n + j0 + 1]
                sino[a, d] = acc * step
    return out


def radon_adjoint(const double[:, ::1] sino, Py_ssize_t n, const double[::1] cos_t,
                  const double[::1] sin_t, const double[::1] offsets,
                  const double[::1] samples, double step):
    cdef Py_ssize_t na = cos_t.shape[0], nd = offsets.shape[0], ns = samples.shape[0]
    cdef Py_ssize_t a, d, q, i0, j0
    cdef double c, s, t, u, v, fu, fv, val
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] img_view = out
    cdef double* img = &img_view[0, 0]
    with nogil:
        for a in range(na):
            c = cos_t[a]
            s = sin_t[a]
            for d in range(nd):
                val = sino[a, d] * step
                if val == 0.0:
                    continue
                t = offsets[d]
                for q in range(ns):
                    u = ((t * c - samples[q] * s) + 0.5) * n - 0.5
                    v = ((t * s + samples[q] * c) + 0.5) * n - 0.5
                    j0 = <Py_ssize_t>(u + 2.0) - 2
                    i0 = <Py_ssize_t>(v + 2.0) - 2
                    if i0 < -1 or j0 < -1 or i0 >= n or j0 >= n:
                        continue
                    fu = u - <double>j0
                    fv = v - <double>i0
                    if i0 >= 0:
                        if j0 >= 0:
                            img[i0 * n + j0] += (1.0 - fu) * (1.0 - fv) * val
                        if j0 + 1 < n:
                            img[i0 * n + j0 + 1] += fu * (1.0 - fv) * val
                    if i0 + 1 < n:
                        if j0 >= 0:
                            img[(i0 + 1) * n + j0] += (1.0 - fu) * fv * val
                        if j0 + 1 < n:
                            img[(i0 + 1) * n + j0 + 1] += fu * fv * val
    return out
