"""Communication graphs for the robot swarm.

Chains are numbered along the path and grids row-major, so that the
accessible prefix ``0..k-1`` selects the first ``k`` robots of the layout.
Node indices are 0-based in memory and 1-based in JSON files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "SpectralData",
    "InvalidSizeError",
    "build_chain",
    "build_grid",
    "laplacian",
    "incidence",
    "degree_matrix",
    "adjacency",
    "chain_spectrum",
    "grid_spectrum",
    "numeric_spectrum",
    "spectrum",
    "is_connected",
    "graph_to_dict",
    "graph_from_dict",
    "save_graph",
    "load_graph",
]

TOPOLOGIES = ("chain", "grid", "custom")


class InvalidSizeError(ValueError):
    """Raised when a graph is requested with too few nodes."""


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with a topology tag.

    ``edges`` holds sorted 0-based pairs ``(i, j)`` with ``i < j``.
    ``dims`` is ``(l1, l2)`` for grids, where ``l1`` is the number of rows.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    topology: str = "custom"
    dims: tuple[int, int] | None = None

    def __post_init__(self):
        if self.num_nodes < 1:
            raise InvalidSizeError(f"graph needs at least one node, got {self.num_nodes}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        canon = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.num_nodes and 0 <= j < self.num_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range for {self.num_nodes} nodes")
            canon.append((min(i, j), max(i, j)))
        canon.sort()
        if len(set(canon)) != len(canon):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", tuple(canon))
        if self.topology == "grid":
            if self.dims is None or self.dims[0] * self.dims[1] != self.num_nodes:
                raise ValueError("grid graphs need dims with l1 * l2 == num_nodes")
            object.__setattr__(self, "dims", (int(self.dims[0]), int(self.dims[1])))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> list[int]:
        return [b if a == i else a for a, b in self.edges if i in (a, b)]

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.num_nodes, dtype=np.int64)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d


@dataclass(frozen=True)
class SpectralData:
    """Laplacian eigenvalues sorted ascending."""

    eigenvalues: np.ndarray = field(repr=False)
    provenance: str = "numeric"

    def __post_init__(self):
        vals = np.sort(np.asarray(self.eigenvalues, dtype=float))
        vals.setflags(write=False)
        object.__setattr__(self, "eigenvalues", vals)
        if self.provenance not in ("closed_form", "numeric"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def algebraic_connectivity(self) -> float:
        return float(self.eigenvalues[1]) if len(self) > 1 else 0.0


def build_chain(n: int) -> Graph:
    """Path graph on ``n`` nodes numbered consecutively along the path."""
    if n < 2:
        raise InvalidSizeError(f"chain needs n >= 2, got {n}")
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)), "chain")


def build_grid(l1: int, l2: int) -> Graph:
    """4-neighbour lattice with ``l1`` rows of ``l2`` nodes, numbered row-major."""
    if l1 < 2 or l2 < 2:
        raise InvalidSizeError(f"grid needs l1, l2 >= 2, got ({l1}, {l2})")
    edges = []
    for r in range(l1):
        for c in range(l2):
            i = r * l2 + c
            if c + 1 < l2:
                edges.append((i, i + 1))
            if r + 1 < l1:
                edges.append((i, i + l2))
    return Graph(l1 * l2, tuple(edges), "grid", (l1, l2))


def adjacency(g: Graph) -> np.ndarray:
    A = np.zeros((g.num_nodes, g.num_nodes))
    for i, j in g.edges:
        A[i, j] = A[j, i] = 1.0
    return A


def degree_matrix(g: Graph) -> np.ndarray:
    return np.diag(g.degrees().astype(float))


def laplacian(g: Graph) -> np.ndarray:
    """Dense graph Laplacian ``D - A``."""
    return degree_matrix(g) - adjacency(g)


def incidence(g: Graph) -> np.ndarray:
    """N x M incidence matrix; the lower-indexed endpoint of each edge gets +1."""
    B = np.zeros((g.num_nodes, g.num_edges))
    for e, (i, j) in enumerate(g.edges):
        B[i, e] = 1.0
        B[j, e] = -1.0
    return B


def _path_eigenvalues(n: int) -> np.ndarray:
    k = np.arange(n)
    vals = 2.0 - 2.0 * np.cos(k * np.pi / n)
    vals[0] = 0.0
    return vals


def chain_spectrum(n: int) -> SpectralData:
    """Closed-form path spectrum ``2 - 2 cos(k pi / n)``, k = 0..n-1."""
    if n < 2:
        raise InvalidSizeError(f"chain needs n >= 2, got {n}")
    return SpectralData(_path_eigenvalues(n), "closed_form")


def grid_spectrum(l1: int, l2: int) -> SpectralData:
    """Closed-form grid spectrum: all pairwise sums of the two path spectra."""
    if l1 < 2 or l2 < 2:
        raise InvalidSizeError(f"grid needs l1, l2 >= 2, got ({l1}, {l2})")
    sums = _path_eigenvalues(l1)[:, None] + _path_eigenvalues(l2)[None, :]
    return SpectralData(sums.ravel(), "closed_form")


def numeric_spectrum(L: np.ndarray, atol: float = 1e-12) -> SpectralData:
    """Eigenvalues of a symmetric matrix from a dense symmetric eigensolver."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {L.shape}")
    if not np.allclose(L, L.T, rtol=0.0, atol=atol):
        raise ValueError("matrix is not symmetric")
    return SpectralData(np.linalg.eigvalsh(L), "numeric")


def spectrum(g: Graph) -> SpectralData:
    """Closed form for chains and grids, numeric eigensolver otherwise."""
    if g.topology == "chain":
        return chain_spectrum(g.num_nodes)
    if g.topology == "grid":
        return grid_spectrum(*g.dims)
    return numeric_spectrum(laplacian(g))


def is_connected(g: Graph) -> bool:
    seen = {0}
    stack = [0]
    nbrs: dict[int, list[int]] = {i: [] for i in range(g.num_nodes)}
    for i, j in g.edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    while stack:
        for j in nbrs[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == g.num_nodes


def graph_to_dict(g: Graph) -> dict:
    doc = {
        "n": g.num_nodes,
        "edges": [[i + 1, j + 1] for i, j in g.edges],
        "topology": g.topology,
    }
    if g.dims is not None:
        doc["dims"] = list(g.dims)
    return doc


def graph_from_dict(doc: dict) -> Graph:
    try:
        n = int(doc["n"])
        edges = tuple((int(i) - 1, int(j) - 1) for i, j in doc["edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed graph document: {exc}") from exc
    topology = doc.get("topology", "custom")
    dims = tuple(doc["dims"]) if doc.get("dims") is not None else None
    return Graph(n, edges, topology, dims)


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=2) + "\n")


def load_graph(path) -> Graph:
    return graph_from_dict(json.loads(Path(path).read_text()))
