"""Backend selection for the hot loops.

The compiled extension is used when importable; set the environment
variable ``FIELDRECON_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

import numpy as np
import scipy.sparse as sp

from . import _fallback

__all__ = ["BACKEND", "CSR", "backend", "to_csr"]

_compiled = None
if not os.environ.get("FIELDRECON_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def backend(name=None):
    """Return the kernel module for ``name`` ("cython", "python" or the default)."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


class CSR:
    """Contiguous CSR arrays in the dtypes the kernels expect."""

    __slots__ = ("indptr", "indices", "data", "n")

    def __init__(self, matrix):
        m = sp.csr_matrix(matrix)
        m.sort_indices()
        self.indptr = np.ascontiguousarray(m.indptr, dtype=np.intc)
        self.indices = np.ascontiguousarray(m.indices, dtype=np.intc)
        self.data = np.ascontiguousarray(m.data, dtype=float)
        self.n = m.shape[0]

    def args(self):
        return self.indptr, self.indices, self.data


def to_csr(matrix) -> CSR:
    return CSR(matrix)
