"""Filter chain turning a raw elevation layer into a traversability layer.

Stages (fixed order): inpaint -> smooth -> slope -> roughness ->
traversability -> min filter. Every stage reads and writes named layers of a
:class:`~tcsim.gridmap.GridMap`; absent (NaN) cells are never treated as zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .gridmap import GridMap, disc_footprint, disc_offsets

log = logging.getLogger(__name__)

RAW = "elevation"
INPAINTED = "elevation_inpainted"
SMOOTHED = "smoothed"
SLOPE = "slope"
ROUGHNESS = "roughness"
TRAVERSABILITY = "traversability"


@dataclass(frozen=True)
class FilterParams:
    inpaint_radius: float = 0.2
    smooth_radius: float = 0.2
    slope_max: float = 0.6
    roughness_max: float = 0.1
    min_filter_radius: float = 0.3

    def __post_init__(self):
        for name in ("inpaint_radius", "smooth_radius", "min_filter_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("slope_max", "roughness_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


def _shifted(a: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """``out[i, j] = a[i + dr, j + dc]``, NaN where that falls off the grid."""
    rows, cols = a.shape
    out = np.full_like(a, np.nan, dtype=float)
    r0, r1 = max(0, -dr), min(rows, rows - dr)
    c0, c1 = max(0, -dc), min(cols, cols - dc)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = a[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    return out


def _disc_sum_count(a: np.ndarray, radius: float, resolution: float):
    total = np.zeros(a.shape)
    count = np.zeros(a.shape)
    for dr, dc in disc_offsets(radius, resolution):
        s = _shifted(a, int(dr), int(dc))
        ok = ~np.isnan(s)
        total[ok] += s[ok]
        count += ok
    return total, count


def inpaint(gmap: GridMap, params: FilterParams) -> GridMap:
    """Fill small holes with the mean of valid cells within the inpaint radius."""
    raw = gmap[RAW]
    if np.isnan(raw).all():
        log.warning("inpaint: elevation layer has no valid cells; left unchanged")
        gmap.add_layer(INPAINTED, raw)
        return gmap
    total, count = _disc_sum_count(raw, params.inpaint_radius, gmap.resolution)
    out = raw.copy()
    holes = np.isnan(raw) & (count > 0)
    out[holes] = total[holes] / count[holes]
    gmap.add_layer(INPAINTED, out)
    return gmap


def smooth(gmap: GridMap, params: FilterParams) -> GridMap:
    src = gmap[INPAINTED]
    total, count = _disc_sum_count(src, params.smooth_radius, gmap.resolution)
    out = np.full(gmap.dims, np.nan)
    ok = ~np.isnan(src)
    out[ok] = total[ok] / count[ok]
    gmap.add_layer(SMOOTHED, out)
    return gmap


def compute_slope(gmap: GridMap) -> GridMap:
    """Slope angle (rad) from a least-squares plane over the 3x3 neighborhood.

    Heights are taken relative to the center cell so a flat window gives an
    exactly zero gradient. Cells with fewer than three valid neighbors, or a
    degenerate (collinear) neighbor set, stay absent.
    """
    z = gmap[SMOOTHED]
    res = gmap.resolution
    keys = ("n", "sx", "sy", "sxx", "syy", "sxy", "sz", "sxz", "syz")
    S = {k: np.zeros(gmap.dims) for k in keys}
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            s = _shifted(z, dr, dc)
            ok = ~np.isnan(s)
            dz = np.where(ok, s - z, 0.0)
            x, y = dc * res, dr * res
            w = ok.astype(float)
            S["n"] += w
            S["sx"] += w * x
            S["sy"] += w * y
            S["sxx"] += w * x * x
            S["syy"] += w * y * y
            S["sxy"] += w * x * y
            S["sz"] += dz
            S["sxz"] += dz * x
            S["syz"] += dz * y
    A = np.stack([
        np.stack([S["n"], S["sx"], S["sy"]], -1),
        np.stack([S["sx"], S["sxx"], S["sxy"]], -1),
        np.stack([S["sy"], S["sxy"], S["syy"]], -1),
    ], -2)
    rhs = np.stack([S["sz"], S["sxz"], S["syz"]], -1)
    det = np.linalg.det(A)
    scale = np.maximum(S["n"] * S["sxx"] * S["syy"], 1e-300)
    usable = (~np.isnan(z)) & (S["n"] >= 3) & (np.abs(det) > 1e-9 * scale)
    slope = np.full(gmap.dims, np.nan)
    if usable.any():
        coef = np.linalg.solve(A[usable], rhs[usable][..., None])[..., 0]
        slope[usable] = np.arctan(np.hypot(coef[:, 1], coef[:, 2]))
    gmap.add_layer(SLOPE, slope)
    return gmap


def compute_roughness(gmap: GridMap) -> GridMap:
    gmap.add_layer(ROUGHNESS, np.abs(gmap[INPAINTED] - gmap[SMOOTHED]))
    return gmap


def traversability_formula(slope, roughness, slope_max=0.6, roughness_max=0.1):
    """Equal-weight blend of slope and roughness penalties, before clamping."""
    return 0.5 * (1.0 - slope / slope_max) + 0.5 * (1.0 - roughness / roughness_max)


def compute_traversability(gmap: GridMap, params: FilterParams) -> GridMap:
    raw = traversability_formula(gmap[SLOPE], gmap[ROUGHNESS], params.slope_max, params.roughness_max)
    gmap.add_layer(TRAVERSABILITY, np.clip(raw, 0.0, 1.0))
    return gmap


def min_filter(gmap: GridMap, params: FilterParams) -> GridMap:
    """Erode traversability: each valid cell takes the minimum over its disc."""
    trav = gmap[TRAVERSABILITY]
    valid = ~np.isnan(trav)
    filled = np.where(valid, trav, np.inf)
    foot = disc_footprint(params.min_filter_radius, gmap.resolution)
    low = ndimage.minimum_filter(filled, footprint=foot, mode="constant", cval=np.inf)
    trav[valid] = low[valid]
    return gmap


def run_pipeline(gmap: GridMap, params: FilterParams) -> GridMap:
    inpaint(gmap, params)
    smooth(gmap, params)
    compute_slope(gmap)
    compute_roughness(gmap)
    compute_traversability(gmap, params)
    min_filter(gmap, params)
    return gmap


def elevation_layer(gmap: GridMap) -> np.ndarray:
    """Best available elevation: inpainted if the pipeline has run, else raw."""
    return gmap[INPAINTED] if INPAINTED in gmap else gmap[RAW]


__all__ = [
    "FilterParams", "inpaint", "smooth", "compute_slope", "compute_roughness",
    "compute_traversability", "min_filter", "run_pipeline", "traversability_formula",
    "elevation_layer", "RAW", "INPAINTED", "SMOOTHED", "SLOPE", "ROUGHNESS", "TRAVERSABILITY",
]
