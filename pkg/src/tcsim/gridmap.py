"""Multi-layer 2.5D grid map.

Layers are float arrays of shape ``(rows, cols)``; NaN marks an absent
(unobserved or undefined) cell. Row index runs along +y, column along +x, and
``origin`` is the world position of the center of cell (0, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .world import PointCloud, WorldModel

_EPS = 1e-9


class OutOfMapError(ValueError):
    pass


class CellIndex(NamedTuple):
    row: int
    col: int


@dataclass
class GridMap:
    resolution: float
    origin: tuple[float, float]
    dims: tuple[int, int]
    layers: dict[str, np.ndarray] = field(default_factory=dict)
    dropped_points: int = 0

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        self.origin = (float(self.origin[0]), float(self.origin[1]))
        self.dims = (int(self.dims[0]), int(self.dims[1]))
        for name, data in self.layers.items():
            if data.shape != self.dims:
                raise ValueError(f"layer {name!r} has shape {data.shape}, expected {self.dims}")
        if "elevation" not in self.layers:
            self.layers["elevation"] = np.full(self.dims, np.nan)

    @classmethod
    def covering(cls, bounds, resolution: float) -> "GridMap":
        """Map whose cells tile the rectangle ``(xmin, xmax, ymin, ymax)``."""
        xmin, xmax, ymin, ymax = bounds
        cols = int(math.floor((xmax - xmin) / resolution + _EPS))
        rows = int(math.floor((ymax - ymin) / resolution + _EPS))
        return cls(resolution, (xmin + resolution / 2, ymin + resolution / 2), (rows, cols))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.layers[name]

    def __contains__(self, name: str) -> bool:
        return name in self.layers

    def add_layer(self, name: str, data=None) -> np.ndarray:
        """Add (or replace) ``name``; other layers are left untouched."""
        if data is None:
            data = np.full(self.dims, np.nan)
        data = np.array(data, dtype=float)
        if data.shape != self.dims:
            raise ValueError(f"layer {name!r} has shape {data.shape}, expected {self.dims}")
        self.layers[name] = data
        return data

    def copy(self) -> "GridMap":
        return GridMap(self.resolution, self.origin, self.dims,
                       {k: v.copy() for k, v in self.layers.items()}, self.dropped_points)

    # -- coordinates ------------------------------------------------------

    def contains_index(self, row: int, col: int) -> bool:
        return 0 <= row < self.dims[0] and 0 <= col < self.dims[1]

    def index_arrays(self, x, y):
        """Vectorized nearest-center indices (ties to the lower index), no bounds check."""
        col = np.ceil((np.asarray(x, dtype=float) - self.origin[0]) / self.resolution - 0.5)
        row = np.ceil((np.asarray(y, dtype=float) - self.origin[1]) / self.resolution - 0.5)
        return row.astype(int), col.astype(int)

    def position_to_index(self, x: float, y: float) -> CellIndex:
        row, col = self.index_arrays(x, y)
        row, col = int(row), int(col)
        if not self.contains_index(row, col):
            raise OutOfMapError(f"position ({x}, {y}) is outside the map")
        return CellIndex(row, col)

    def index_to_position(self, idx) -> tuple[float, float]:
        row, col = idx
        if not self.contains_index(row, col):
            raise OutOfMapError(f"index {tuple(idx)} is outside the map dims {self.dims}")
        return (self.origin[0] + col * self.resolution, self.origin[1] + row * self.resolution)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (x, y) of every cell center, each shaped like a layer."""
        rows, cols = self.dims
        xs = self.origin[0] + np.arange(cols) * self.resolution
        ys = self.origin[1] + np.arange(rows) * self.resolution
        X, Y = np.meshgrid(xs, ys)
        return X, Y

    def contains_position(self, x: float, y: float) -> bool:
        row, col = self.index_arrays(x, y)
        return self.contains_index(int(row), int(col))

    def submap(self, center, radius: float) -> "GridMap":
        """Window of cells within ``radius`` of ``center``, clipped to the map.

        Layers of the result are numpy views: writes go through to this map.
        """
        if radius <= 0:
            raise ValueError("radius must be > 0")
        r, c = self.position_to_index(*center)
        k = int(math.floor(radius / self.resolution + _EPS))
        r0, r1 = max(r - k, 0), min(r + k + 1, self.dims[0])
        c0, c1 = max(c - k, 0), min(c + k + 1, self.dims[1])
        origin = (self.origin[0] + c0 * self.resolution, self.origin[1] + r0 * self.resolution)
        sub = GridMap.__new__(GridMap)
        sub.resolution = self.resolution
        sub.origin = origin
        sub.dims = (r1 - r0, c1 - c0)
        sub.layers = {name: data[r0:r1, c0:c1] for name, data in self.layers.items()}
        sub.dropped_points = 0
        sub.offset = (r0, c0)
        return sub


def integrate_pointcloud(gmap: GridMap, cloud: PointCloud) -> GridMap:
    """Fuse ``cloud`` into the elevation layer with a per-cell running max.

    Points falling outside the map are dropped and tallied in
    ``gmap.dropped_points``.
    """
    pts = np.asarray(cloud.points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return gmap
    row, col = gmap.index_arrays(pts[:, 0], pts[:, 1])
    inside = (row >= 0) & (row < gmap.dims[0]) & (col >= 0) & (col < gmap.dims[1])
    gmap.dropped_points += int((~inside).sum())
    elev = gmap.layers["elevation"]
    np.fmax.at(elev, (row[inside], col[inside]), pts[inside, 2])
    return gmap


def ground_truth_map(world: WorldModel, resolution: float) -> GridMap:
    """Map whose elevation layer is the true surface height at every cell center."""
    gmap = GridMap.covering(world.bounds, resolution)
    X, Y = gmap.cell_centers()
    gmap.add_layer("elevation", world.surface_height(X, Y))
    return gmap


def disc_offsets(radius: float, resolution: float) -> np.ndarray:
    """Integer (drow, dcol) offsets of cells whose centers lie within ``radius``."""
    k = int(math.floor(radius / resolution + _EPS))
    d = np.arange(-k, k + 1)
    dr, dc = np.meshgrid(d, d, indexing="ij")
    inside = (dr * dr + dc * dc) * resolution**2 <= radius**2 + _EPS
    return np.stack([dr[inside], dc[inside]], axis=1)


def disc_footprint(radius: float, resolution: float) -> np.ndarray:
    """Boolean square kernel of the same disc as :func:`disc_offsets`."""
    k = int(math.floor(radius / resolution + _EPS))
    d = np.arange(-k, k + 1)
    dr, dc = np.meshgrid(d, d, indexing="ij")
    return (dr * dr + dc * dc) * resolution**2 <= radius**2 + _EPS
