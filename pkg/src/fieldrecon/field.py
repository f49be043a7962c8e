"""Gridded scalar fields and their mapping onto robot states.

Row 0 of a field is the top of the domain.  Grid graphs read the field
row-major; chains walk it boustrophedon so that chain neighbours stay
spatially adjacent.
"""
from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph

__all__ = [
    "ScalarField",
    "ErrorMap",
    "FieldFormatError",
    "EmptyDataError",
    "gaussian_field",
    "constant_field",
    "synthetic_salinity",
    "load_gridded_csv",
    "save_gridded_csv",
    "field_to_csv",
    "node_order",
    "field_to_state",
    "state_to_field",
    "error_map",
]

_EXTENT_RE = re.compile(
    r"#\s*extent:\s*([^,\s]+)\s*,\s*([^,\s]+)\s*,\s*([^,\s]+)\s*,\s*([^,\s]+)"
    r"(?:\s+units:\s*(.*))?$"
)


class FieldFormatError(ValueError):
    pass


class EmptyDataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    values: np.ndarray
    extent: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    units: str = ""
    fill_count: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or min(v.shape) < 2:
            raise ValueError(f"field must be a 2-D grid with both sides >= 2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        x0, x1, y0, y1 = (float(e) for e in self.extent)
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate extent {self.extent}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "extent", (x0, x1, y0, y1))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre x of each column and y of each row (row 0 at the top)."""
        return _cell_centres(*self.shape, self.extent)


@dataclass(frozen=True, eq=False)
class ErrorMap:
    values: np.ndarray
    l2_relative: float
    max_abs: float

    @property
    def summary(self) -> dict:
        return {"l2_relative": self.l2_relative, "max_abs": self.max_abs}


def _cell_centres(l1, l2, extent):
    x0, x1, y0, y1 = extent
    xs = x0 + (np.arange(l2) + 0.5) * (x1 - x0) / l2
    ys = y1 - (np.arange(l1) + 0.5) * (y1 - y0) / l1
    return xs, ys


def gaussian_field(l1: int, l2: int, center=(0.5, 0.5), sigma=(0.2, 0.2),
                   amplitude: float = 1.0, extent=(0.0, 1.0, 0.0, 1.0),
                   units: str = "") -> ScalarField:
    """Axis-aligned Gaussian bump sampled at cell centres."""
    sx, sy = sigma
    if sx <= 0 or sy <= 0:
        raise ValueError("sigma must be positive")
    xs, ys = _cell_centres(l1, l2, extent)
    gx = (xs - center[0]) ** 2 / (2.0 * sx * sx)
    gy = (ys - center[1]) ** 2 / (2.0 * sy * sy)
    return ScalarField(amplitude * np.exp(-(gy[:, None] + gx[None, :])), extent, units)


def constant_field(l1: int, l2: int, value: float, extent=(0.0, 1.0, 0.0, 1.0)) -> ScalarField:
    return ScalarField(np.full((l1, l2), float(value)), extent)


def synthetic_salinity(l1: int, l2: int, extent=(0.0, 1.0, 0.0, 1.0)) -> ScalarField:
    """Stand-in for an ocean salinity section: two Gaussians on a linear ramp (psu)."""
    xs, ys = _cell_centres(l1, l2, extent)
    X, Y = np.meshgrid((xs - extent[0]) / (extent[1] - extent[0]),
                       (ys - extent[2]) / (extent[3] - extent[2]))
    ramp = 35.0 + 1.2 * X - 0.6 * Y
    bump1 = 0.9 * np.exp(-((X - 0.3) ** 2 + (Y - 0.7) ** 2) / (2 * 0.15 ** 2))
    bump2 = -0.7 * np.exp(-((X - 0.72) ** 2 / (2 * 0.12 ** 2) + (Y - 0.3) ** 2 / (2 * 0.2 ** 2)))
    return ScalarField(ramp + bump1 + bump2, extent, "psu")


def _fill_nearest(values: np.ndarray) -> tuple[np.ndarray, int]:
    missing = np.isnan(values)
    count = int(missing.sum())
    if count == 0:
        return values, 0
    if count == values.size:
        raise EmptyDataError("all values are missing")
    known = np.argwhere(~missing)
    out = values.copy()
    for r, c in np.argwhere(missing):
        d2 = (known[:, 0] - r) ** 2 + (known[:, 1] - c) ** 2
        kr, kc = known[np.argmin(d2)]
        out[r, c] = values[kr, kc]
    return out, count


def load_gridded_csv(path) -> ScalarField:
    """Read a field CSV; empty or ``NaN`` cells are filled from the nearest known cell."""
    extent = (0.0, 1.0, 0.0, 1.0)
    units = ""
    rows = []
    width = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            m = _EXTENT_RE.match(s)
            if m:
                try:
                    extent = tuple(float(v) for v in m.groups()[:4])
                except ValueError as exc:
                    raise FieldFormatError(f"{path}: line {lineno}: bad extent") from exc
                units = (m.group(5) or "").strip()
            continue
        cells = [c.strip() for c in s.split(",")]
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise FieldFormatError(
                f"{path}: line {lineno}: ragged row ({len(cells)} values, expected {width})"
            )
        row = []
        for c in cells:
            if c == "" or c.lower() == "nan":
                row.append(math.nan)
                continue
            try:
                row.append(float(c))
            except ValueError as exc:
                raise FieldFormatError(f"{path}: line {lineno}: {exc}") from exc
        rows.append(row)
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    values, filled = _fill_nearest(np.array(rows, dtype=float))
    try:
        return ScalarField(values, extent, units, filled)
    except ValueError as exc:
        raise FieldFormatError(f"{path}: {exc}") from exc


def field_to_csv(values: np.ndarray, extent, units: str = "") -> str:
    buf = io.StringIO()
    buf.write("# extent: " + ",".join(f"{e:.17g}" for e in extent))
    buf.write(f" units: {units}\n" if units else "\n")
    for row in np.asarray(values):
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


def save_gridded_csv(f: ScalarField | ErrorMap, path, extent=None, units: str | None = None) -> None:
    if isinstance(f, ScalarField):
        extent = f.extent if extent is None else extent
        units = f.units if units is None else units
    Path(path).write_text(field_to_csv(f.values, extent or (0.0, 1.0, 0.0, 1.0), units or ""))


def node_order(shape: tuple[int, int], g: Graph) -> np.ndarray:
    """Flat (row-major) field index assigned to each node of ``g``."""
    l1, l2 = shape
    if g.num_nodes != l1 * l2:
        raise ValueError(f"graph has {g.num_nodes} nodes, field has {l1 * l2} cells")
    if g.topology == "grid":
        if tuple(g.dims) != (l1, l2):
            raise ValueError(f"grid dims {g.dims} do not match field shape {shape}")
        return np.arange(l1 * l2)
    if g.topology == "chain":
        idx = np.arange(l1 * l2).reshape(l1, l2)
        idx[1::2] = idx[1::2, ::-1]
        return idx.ravel()
    raise ValueError("field mapping is defined for chain and grid graphs only")


def field_to_state(f: ScalarField, g: Graph) -> np.ndarray:
    return f.values.ravel()[node_order(f.shape, g)].copy()


def state_to_field(state, shape: tuple[int, int], g: Graph) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    order = node_order(shape, g)
    if state.shape != (len(order),):
        raise ValueError(f"state must have length {len(order)}")
    out = np.empty(len(order))
    out[order] = state
    return out.reshape(shape)


def error_map(actual: ScalarField, estimated_state, g: Graph) -> ErrorMap:
    est = state_to_field(estimated_state, actual.shape, g)
    diff = np.abs(est - actual.values)
    denom = float(np.linalg.norm(actual.values))
    num = float(np.linalg.norm(diff))
    rel = num / denom if denom > 0 else (0.0 if num == 0 else math.inf)
    return ErrorMap(diff, rel, float(diff.max()))
