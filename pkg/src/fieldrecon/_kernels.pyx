# cython: language_level=3
"""Compiled time-stepping loops. Mirrors ``_fallback`` exactly."""
import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline void _csr_matvec(const int[::1] indptr, const int[::1] indices,
                             const double[::1] data, double[::1] x,
                             double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double acc
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc = acc + data[p] * x[indices[p]]
        out[i] = acc


def csr_matvec(const int[::1] indptr, const int[::1] indices,
               const double[::1] data, double[::1] x):
    out = np.empty(indptr.shape[0] - 1)
    _csr_matvec(indptr, indices, data, x, out)
    return out


def modal_sweep(const double[::1] decay, const double[:, ::1] forcing):
    cdef Py_ssize_t m = forcing.shape[0]
    cdef Py_ssize_t n = forcing.shape[1]
    cdef Py_ssize_t i, j
    p_arr = np.zeros(n)
    cdef double[::1] p = p_arr
    with nogil:
        for i in range(m - 1, -1, -1):
            for j in range(n):
                p[j] = decay[j] * p[j] + forcing[i, j]
    return p_arr


def adjoint_rk4(const int[::1] indptr, const int[::1] indices,
                const double[::1] data, const double[:, ::1] forcing, double dt):
    cdef Py_ssize_t m = forcing.shape[0]
    cdef Py_ssize_t n = forcing.shape[1]
    cdef Py_ssize_t s, j, i0, i1
    p_arr = np.zeros(n)
    cdef double[::1] p = p_arr
    cdef double[::1] tmp = np.empty(n)
    cdef double[::1] k1 = np.empty(n)
    cdef double[::1] k2 = np.empty(n)
    cdef double[::1] k3 = np.empty(n)
    cdef double[::1] k4 = np.empty(n)
    cdef double[::1] lv = np.empty(n)
    cdef double fm
    with nogil:
        for s in range(m - 1):
            i0 = m - 1 - s
            i1 = i0 - 1
            _csr_matvec(indptr, indices, data, p, lv)
            for j in range(n):
                k1[j] = -lv[j] + forcing[i0, j]
                tmp[j] = p[j] + 0.5 * dt * k1[j]
            _csr_matvec(indptr, indices, data, tmp, lv)
            for j in range(n):
                fm = 0.5 * (forcing[i0, j] + forcing[i1, j])
                k2[j] = -lv[j] + fm
                tmp[j] = p[j] + 0.5 * dt * k2[j]
            _csr_matvec(indptr, indices, data, tmp, lv)
            for j in range(n):
                fm = 0.5 * (forcing[i0, j] + forcing[i1, j])
                k3[j] = -lv[j] + fm
                tmp[j] = p[j] + dt * k3[j]
            _csr_matvec(indptr, indices, data, tmp, lv)
            for j in range(n):
                k4[j] = -lv[j] + forcing[i1, j]
                p[j] = p[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    return p_arr


def em_path(const int[::1] indptr, const int[::1] indices,
            const double[::1] data, const double[::1] x0,
            const double[:, ::1] noise, double step):
    cdef Py_ssize_t steps = noise.shape[0]
    cdef Py_ssize_t n = noise.shape[1]
    cdef Py_ssize_t s, j
    path_arr = np.empty((steps + 1, n))
    cdef double[:, ::1] path = path_arr
    cdef double[::1] lv = np.empty(n)
    with nogil:
        for j in range(n):
            path[0, j] = x0[j]
        for s in range(steps):
            _csr_matvec(indptr, indices, data, path[s], lv)
            for j in range(n):
                path[s + 1, j] = path[s, j] - step * lv[j] + noise[s, j]
    return path_arr
