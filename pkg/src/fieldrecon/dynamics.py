"""Consensus dynamics ``dX/dt = -L X`` observed through a node selector.

Trajectories are computed from one symmetric eigendecomposition per system,
so sampling at many instants costs a matrix product rather than repeated
matrix exponentials.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels
from .graph import Graph, laplacian

__all__ = [
    "NetworkSystem",
    "Trajectory",
    "InvalidTimeError",
    "InvalidParameterError",
    "StabilityError",
    "TrajectoryFormatError",
    "output_matrix",
    "propagate",
    "states",
    "simulate",
    "simulate_noisy",
    "sample_times",
    "save_trajectory",
    "load_trajectory",
    "trajectory_to_csv",
]


class InvalidTimeError(ValueError):
    pass


class InvalidParameterError(ValueError):
    pass


class StabilityError(ValueError):
    """Explicit time step too large for the Laplacian's largest eigenvalue."""


class TrajectoryFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NetworkSystem:
    """Laplacian dynamics with a set of accessible (measured) nodes.

    ``accessible`` holds 0-based node indices in output order.
    """

    laplacian: np.ndarray = field(repr=False)
    accessible: tuple[int, ...]

    def __post_init__(self):
        L = np.array(self.laplacian, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError(f"laplacian must be square, got shape {L.shape}")
        if not np.array_equal(L, L.T):
            raise ValueError("laplacian must be symmetric")
        if not np.allclose(L.sum(axis=1), 0.0, atol=1e-12):
            raise ValueError("laplacian rows must sum to zero")
        L.setflags(write=False)
        object.__setattr__(self, "laplacian", L)
        acc = tuple(int(i) for i in self.accessible)
        n = L.shape[0]
        if not 1 <= len(acc) <= n:
            raise ValueError(f"need 1 <= k <= {n} accessible nodes, got {len(acc)}")
        if len(set(acc)) != len(acc) or min(acc) < 0 or max(acc) >= n:
            raise ValueError("accessible indices must be distinct and in range")
        object.__setattr__(self, "accessible", acc)

    @classmethod
    def from_graph(cls, g: Graph, k: int | None = None, accessible=None) -> "NetworkSystem":
        """System on ``g`` observed at the prefix ``0..k-1`` or at explicit nodes."""
        if accessible is None:
            if k is None:
                raise ValueError("give either k or accessible")
            accessible = range(k)
        return cls(laplacian(g), tuple(accessible))

    @property
    def n(self) -> int:
        return self.laplacian.shape[0]

    @property
    def k(self) -> int:
        return len(self.accessible)

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (clipped at 0) and orthonormal eigenvectors of L."""
        lam, V = np.linalg.eigh(self.laplacian)
        return np.maximum(lam, 0.0), V

    @cached_property
    def observed_modes(self) -> np.ndarray:
        """Rows of the eigenvector matrix at the accessible nodes, ``C V``."""
        return self.eig[1][list(self.accessible)]

    @cached_property
    def csr(self) -> kernels.CSR:
        return kernels.to_csr(self.laplacian)

    @property
    def lambda_max(self) -> float:
        return float(self.eig[0][-1])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Output samples; row ``i`` of ``samples`` is taken at ``times[i]``."""

    times: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        y = np.asarray(self.samples, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if t.ndim != 1 or len(t) == 0:
            raise ValueError("times must be a non-empty vector")
        if y.shape[0] != len(t):
            raise ValueError(f"{len(t)} times but {y.shape[0]} sample rows")
        if t[0] != 0.0:
            raise ValueError("trajectories start at t = 0")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "samples", y)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def k(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return len(self.times)

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        if len(self.times) < 3:
            return True
        dt = np.diff(self.times)
        return bool(np.allclose(dt, dt[0], rtol=rtol, atol=0.0))


def output_matrix(sys: NetworkSystem) -> np.ndarray:
    C = np.zeros((sys.k, sys.n))
    C[np.arange(sys.k), list(sys.accessible)] = 1.0
    return C


def states(sys: NetworkSystem, x0, times) -> np.ndarray:
    """Full states ``exp(-L t) x0`` at each instant in ``times`` as an (m, N) array."""
    lam, V = sys.eig
    x0 = np.asarray(x0, dtype=float)
    times = np.asarray(times, dtype=float)
    X = (np.exp(-np.outer(times, lam)) * (V.T @ x0)) @ V.T
    # the zero mode is exact in theory; pin the mean against rounding
    X += (x0.mean() - X.mean(axis=1))[:, None]
    X[times == 0] = x0
    return X


def propagate(sys: NetworkSystem, x0, t: float) -> np.ndarray:
    """``exp(-L t) x0``."""
    if t < 0:
        raise InvalidTimeError(f"t must be nonnegative, got {t}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise ValueError(f"state must have length {sys.n}, got shape {x0.shape}")
    return states(sys, x0, [t])[0]


def sample_times(horizon: float, rate: float) -> np.ndarray:
    """Uniform instants ``i / rate`` in ``[0, horizon]``."""
    if horizon <= 0 or rate <= 0:
        raise InvalidParameterError(f"horizon and rate must be positive, got {horizon}, {rate}")
    m = int(np.floor(horizon * rate + 1e-9)) + 1
    return np.arange(m) / rate


def simulate(sys: NetworkSystem, x0, horizon: float, rate: float,
             noise_std: float = 0.0, seed: int | None = None) -> Trajectory:
    """Sample ``C exp(-L t) x0`` at ``rate`` Hz over ``[0, horizon]``.

    With ``noise_std > 0`` independent Gaussian measurement noise is added.
    """
    times = sample_times(horizon, rate)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise ValueError(f"state must have length {sys.n}, got shape {x0.shape}")
    Y = states(sys, x0, times)[:, list(sys.accessible)]
    if noise_std > 0:
        Y = Y + np.random.default_rng(seed).normal(0.0, noise_std, size=Y.shape)
    return Trajectory(times, Y)


def simulate_noisy(sys: NetworkSystem, x0, horizon: float, step: float = 1e-2,
                   seed: int = 0, noise: bool = True, backend: str | None = None) -> Trajectory:
    """Euler-Maruyama path of ``dX = -L X dt + dW`` for the full state.

    Returns a Trajectory whose samples are all ``N`` node values.
    """
    if step <= 0 or horizon < step:
        raise InvalidParameterError(f"need step > 0 and horizon >= step, got {step}, {horizon}")
    if step >= 2.0 / max(sys.lambda_max, 1e-300):
        raise StabilityError(
            f"step {step} violates explicit stability bound 2/lambda_max = {2.0 / sys.lambda_max:.6g}"
        )
    steps = int(np.floor(horizon / step + 1e-9))
    if noise:
        xi = np.random.default_rng(seed).standard_normal((steps, sys.n)) * np.sqrt(step)
    else:
        xi = np.zeros((steps, sys.n))
    k = kernels.backend(backend)
    path = k.em_path(*sys.csr.args(), np.asarray(x0, dtype=float), xi, float(step))
    return Trajectory(np.arange(steps + 1) * step, path)


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    header = ["t"] + [f"y{i + 1}" for i in range(traj.k)]
    buf.write(",".join(header) + "\n")
    for t, row in zip(traj.times, traj.samples):
        buf.write(",".join(f"{v:.17g}" for v in (t, *row)) + "\n")
    return buf.getvalue()


def save_trajectory(traj: Trajectory, path) -> None:
    Path(path).write_text(trajectory_to_csv(traj))


def load_trajectory(path) -> Trajectory:
    """Read the ``t,y1,...,yk`` CSV format; errors name the offending line."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TrajectoryFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t" or len(header) < 2:
        raise TrajectoryFormatError(f"{path}: line 1: expected header 't,y1,...,yk'")
    width = len(header)
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise TrajectoryFormatError(
                f"{path}: line {lineno}: expected {width} fields, got {len(row)}"
            )
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise TrajectoryFormatError(f"{path}: line {lineno}: {exc}") from exc
    if not data:
        raise TrajectoryFormatError(f"{path}: no samples")
    arr = np.array(data)
    if not np.all(np.isfinite(arr)):
        raise TrajectoryFormatError(f"{path}: non-finite values")
    try:
        return Trajectory(arr[:, 0], arr[:, 1:])
    except ValueError as exc:
        raise TrajectoryFormatError(f"{path}: {exc}") from exc
