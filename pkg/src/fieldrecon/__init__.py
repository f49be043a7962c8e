"""Scalar-field reconstruction from the outputs of a consensus network.

Modules: ``graph`` (chain/grid graphs and spectra), ``dynamics`` (consensus
simulation), ``estimator`` (adjoint-gradient reconstruction),
``observability`` (Gramian trace and bounds), ``robustness`` (Laplacian
energy), ``field`` (gridded fields) and ``cli``.
"""
__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402,F401
