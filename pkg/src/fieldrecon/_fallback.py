"""Numpy implementations of the time-stepping loops.

Same signatures and arithmetic order as the compiled ``_kernels`` module;
used when the extension is unavailable or ``FIELDRECON_PURE_PYTHON`` is set.
"""
import numpy as np


def _csr(indptr, indices, data):
    n = len(indptr) - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    L = np.zeros((n, n))
    np.add.at(L, (rows, np.asarray(indices)), np.asarray(data))
    return L


def csr_matvec(indptr, indices, data, x):
    return _csr(indptr, indices, data) @ np.asarray(x, dtype=float)


def modal_sweep(decay, forcing):
    decay = np.asarray(decay, dtype=float)
    p = np.zeros(forcing.shape[1])
    for i in range(forcing.shape[0] - 1, -1, -1):
        p = decay * p + forcing[i]
    return p


def adjoint_rk4(indptr, indices, data, forcing, dt):
    L = _csr(indptr, indices, data)
    m = forcing.shape[0]
    p = np.zeros(forcing.shape[1])
    for s in range(m - 1):
        f0 = forcing[m - 1 - s]
        f1 = forcing[m - 2 - s]
        fm = 0.5 * (f0 + f1)
        k1 = -(L @ p) + f0
        k2 = -(L @ (p + 0.5 * dt * k1)) + fm
        k3 = -(L @ (p + 0.5 * dt * k2)) + fm
        k4 = -(L @ (p + dt * k3)) + f1
        p = p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return p


def em_path(indptr, indices, data, x0, noise, step):
    L = _csr(indptr, indices, data)
    path = np.empty((noise.shape[0] + 1, noise.shape[1]))
    path[0] = x0
    for s in range(noise.shape[0]):
        path[s + 1] = path[s] - step * (L @ path[s]) + noise[s]
    return path
