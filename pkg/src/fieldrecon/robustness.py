"""Noise robustness through the first-order Laplacian energy.

Under ``dX = -L X dt + dW`` the consensus deviation ``(I - J/N) X`` has
steady-state mean square ``sum over nonzero eigenvalues of 1 / (2 lambda)``.
:func:`empirical_output_variance` checks that identity by simulation.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import NetworkSystem, simulate_noisy
from .graph import Graph, SpectralData, chain_spectrum, grid_spectrum, spectrum

__all__ = [
    "EnergyReport",
    "DisconnectedGraphError",
    "HorizonTooShortError",
    "laplacian_energy",
    "energy_sweep",
    "energy_sweep_to_csv",
    "deviation_projector",
    "empirical_output_variance",
    "DEFAULT_SIZES",
]

DEFAULT_SIZES = (4, 16, 36, 64, 100, 400, 2500, 10000)
ZERO_TOL = 1e-9


class DisconnectedGraphError(ValueError):
    pass


class HorizonTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyReport:
    topology: str
    n: int
    energy: float
    eigenvalues_used: np.ndarray = field(repr=False)


def _nonzero(spec: SpectralData | np.ndarray) -> np.ndarray:
    lam = np.asarray(getattr(spec, "eigenvalues", spec), dtype=float)
    zero = np.abs(lam) <= ZERO_TOL
    if zero.sum() != 1:
        raise DisconnectedGraphError(
            f"expected exactly one zero eigenvalue, found {int(zero.sum())}"
        )
    return np.sort(lam[~zero])


def laplacian_energy(spec: SpectralData | np.ndarray) -> float:
    return float(np.sum(0.5 / _nonzero(spec)))


def _report(topology: str, spec: SpectralData) -> EnergyReport:
    used = _nonzero(spec)
    return EnergyReport(topology, len(spec), float(np.sum(0.5 / used)), used)


def energy_sweep(sizes=DEFAULT_SIZES) -> list[tuple[EnergyReport, EnergyReport]]:
    """(chain, square grid) energy reports for each perfect-square size."""
    out = []
    for n in sizes:
        side = math.isqrt(n)
        if n < 4 or side * side != n:
            raise ValueError(f"sizes must be perfect squares >= 4, got {n}")
        out.append((_report("chain", chain_spectrum(n)), _report("grid", grid_spectrum(side, side))))
    return out


def energy_sweep_to_csv(pairs) -> str:
    buf = io.StringIO()
    buf.write("n,chain_energy,grid_energy\n")
    for chain, grid in pairs:
        buf.write(f"{chain.n},{chain.energy:.17g},{grid.energy:.17g}\n")
    return buf.getvalue()


def deviation_projector(n: int) -> np.ndarray:
    """``I - J/N``, which removes the average from a state."""
    return np.eye(n) - np.full((n, n), 1.0 / n)


def empirical_output_variance(g: Graph, horizon: float = 200.0, step: float = 5e-3,
                              replicates: int = 64, seed: int = 0, noise: bool = True,
                              x0=None, backend: str | None = None) -> tuple[float, float]:
    """Monte-Carlo steady-state ``E |(I - J/N) X|^2`` and its standard error.

    Each replicate uses seed ``seed + r``; the first half of every path is
    discarded and the standard error comes from the spread of the per-replicate
    time averages.
    """
    lam2 = spectrum(g).algebraic_connectivity
    if lam2 <= ZERO_TOL:
        raise DisconnectedGraphError("graph is disconnected")
    if math.exp(-2.0 * lam2 * horizon / 2.0) >= 0.01:
        raise HorizonTooShortError(
            f"horizon {horizon} too short to forget the initial state (lambda_2 = {lam2:.4g})"
        )
    if replicates < 2:
        raise ValueError("need at least two replicates for a standard error")
    sys = NetworkSystem.from_graph(g, g.num_nodes)
    x0 = np.zeros(g.num_nodes) if x0 is None else np.asarray(x0, dtype=float)
    means = np.empty(replicates)
    for r in range(replicates):
        path = simulate_noisy(sys, x0, horizon, step, seed=seed + r, noise=noise,
                              backend=backend).samples
        tail = path[len(path) // 2:]
        dev = tail - tail.mean(axis=1, keepdims=True)
        means[r] = np.mean(np.einsum("ij,ij->i", dev, dev))
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(replicates))
