"""Trace of the finite-horizon observability Gramian and its spectral bounds.

For ``W = integral_0^T exp(-L t) C^T C exp(-L t) dt`` the trace equals the sum
of the accessible diagonal entries of ``M = V diag(c) V^T``, where
``c_i = integral_0^T exp(-2 lambda_i t) dt``.  Summing the ``k`` smallest and
``k`` largest ``c_i`` brackets it.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dynamics import NetworkSystem, output_matrix
from .graph import SpectralData, build_chain, build_grid, chain_spectrum, grid_spectrum

__all__ = [
    "TraceBounds",
    "InvalidSpectrumError",
    "mode_weights",
    "trace_bounds",
    "gramian_diagonal",
    "gramian_trace_numeric",
    "gramian_trace_quadrature",
    "compare_topologies",
    "comparison_to_csv",
    "ComparisonRow",
    "default_ratios",
]

NUMERIC_TRACE_MAX_N = 400


class InvalidSpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class TraceBounds:
    lower: float
    upper: float
    n: int
    k: int
    horizon: float
    trace_numeric: float | None = None


def _weights(lam: np.ndarray, horizon: float) -> np.ndarray:
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if np.any(lam < -1e-9):
        raise InvalidSpectrumError(f"negative eigenvalue {lam.min():g}")
    lam = np.maximum(lam, 0.0)
    c = np.full(lam.shape, float(horizon))
    pos = lam * horizon > 1e-12
    # -expm1 keeps precision when 2*lam*T is small
    c[pos] = -np.expm1(-2.0 * lam[pos] * horizon) / (2.0 * lam[pos])
    small = ~pos & (lam > 0)
    c[small] = horizon * (1.0 - lam[small] * horizon)
    return c


def mode_weights(spectrum: SpectralData | np.ndarray, horizon: float) -> np.ndarray:
    """``(1 - exp(-2 lam T)) / (2 lam)`` per eigenvalue, ``T`` at zero; ascending.

    Ascending weights correspond to descending eigenvalues.
    """
    lam = np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=float)
    return np.sort(_weights(lam, horizon))


def trace_bounds(spectrum: SpectralData | np.ndarray, k: int, horizon: float) -> TraceBounds:
    c = mode_weights(spectrum, horizon)
    n = len(c)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    return TraceBounds(float(c[:k].sum()), float(c[n - k:].sum()), n, k, float(horizon))


def gramian_diagonal(sys: NetworkSystem, horizon: float) -> np.ndarray:
    """Diagonal of ``M = V diag(c) V^T`` for every node."""
    lam, V = sys.eig
    return (V * V) @ _weights(lam, horizon)


def gramian_trace_numeric(sys: NetworkSystem, horizon: float) -> float:
    """Exact trace via ``sum_{i in accessible} M_ii`` with ``M = V diag(c) V^T``."""
    return float(gramian_diagonal(sys, horizon)[list(sys.accessible)].sum())


def gramian_trace_quadrature(sys: NetworkSystem, horizon: float, steps: int = 10_000) -> float:
    """Brute-force trapezoidal integral of ``Tr(C exp(-L t)^2 C^T)``.

    Uses dense matrix exponentials; meant as an oracle for small systems.
    """
    C = output_matrix(sys)
    dt = horizon / steps
    step = expm(-sys.laplacian * dt)
    phi = np.eye(sys.n)
    vals = np.empty(steps + 1)
    for i in range(steps + 1):
        cp = C @ phi
        vals[i] = np.sum(cp * cp)
        phi = step @ phi
    return float(dt * (vals.sum() - 0.5 * (vals[0] + vals[-1])))


@dataclass(frozen=True)
class ComparisonRow:
    topology: str
    n: int
    k: int
    ratio: float
    horizon: float
    lower: float
    upper: float
    trace_numeric: float | None


def default_ratios(count: int = 10) -> list[float]:
    return [i / count for i in range(1, count + 1)]


def _k_for_ratio(r: float, n: int) -> int:
    return min(n, max(1, int(math.floor(r * n + 0.5))))


def compare_topologies(n: int, ratios=None, horizon: float = 50.0,
                       numeric: bool | None = None) -> list[ComparisonRow]:
    """Chain vs square grid bounds (and exact trace for small ``n``) per sensor ratio.

    Accessible nodes are the prefix ``0..k-1`` of each numbering.
    """
    side = math.isqrt(n)
    if n < 4 or side * side != n:
        raise ValueError(f"n must be a perfect square >= 4, got {n}")
    ratios = default_ratios() if ratios is None else list(ratios)
    if any(not 0 < r <= 1 for r in ratios):
        raise ValueError("ratios must lie in (0, 1]")
    if numeric is None:
        numeric = n <= NUMERIC_TRACE_MAX_N
    specs = {"chain": chain_spectrum(n), "grid": grid_spectrum(side, side)}
    prefix_traces = {}
    if numeric:
        for topo, g in (("chain", build_chain(n)), ("grid", build_grid(side, side))):
            diag = gramian_diagonal(NetworkSystem.from_graph(g, n), horizon)
            prefix_traces[topo] = np.cumsum(diag)
    rows = []
    for topo in ("chain", "grid"):
        for r in ratios:
            k = _k_for_ratio(r, n)
            b = trace_bounds(specs[topo], k, horizon)
            tr = float(prefix_traces[topo][k - 1]) if numeric else None
            rows.append(ComparisonRow(topo, n, k, float(r), float(horizon), b.lower, b.upper, tr))
    return rows


def comparison_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("topology,n,k,ratio,horizon,lower,upper,trace_numeric\n")
    for row in rows:
        tr = "" if row.trace_numeric is None else f"{row.trace_numeric:.17g}"
        buf.write(
            f"{row.topology},{row.n},{row.k},{row.ratio:.17g},{row.horizon:.17g},"
            f"{row.lower:.17g},{row.upper:.17g},{tr}\n"
        )
    return buf.getvalue()
