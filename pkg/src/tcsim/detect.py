"""Map-based detectors: cliffs, anchor points (peakness) and landing spots."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .gridmap import CellIndex, GridMap, OutOfMapError, disc_footprint, disc_offsets
from .mapfilter import SLOPE, TRAVERSABILITY, elevation_layer
from .planner import Path, PlanWeights, cost_grid, plan_to_many

PEAKNESS_FLOOR = 1e-6  # m^3, lower bound on the variance used for peakness
MIN_MASS = 0.05  # m, total relative height below which a neighborhood is "flat"
MIN_NEIGHBORS = 5


@dataclass(frozen=True)
class CliffParams:
    threshold: float = 300.0
    radius: float = 0.8
    count: int = 12
    turns: float = 2.0

    def __post_init__(self):
        if self.threshold <= 0 or self.radius <= 0 or self.count < 1:
            raise ValueError("cliff threshold and radius must be > 0, count >= 1")


@dataclass
class CliffResult:
    cliff: bool
    best_goal: tuple[float, float]
    best_cost: float
    path: Path | None


@dataclass
class AnchorCandidate:
    cell: CellIndex
    xy: tuple[float, float]
    peakness: float
    covariance: np.ndarray
    sigma_l2: float
    sigma_s2: float
    radius: float
    height: float  # center elevation above the neighborhood minimum


@dataclass(frozen=True)
class LandingParams:
    search_radius: float = 1.5
    max_elevation_diff: float = 0.05
    max_slope: float = 0.2
    min_traversability: float = 0.7
    footprint_radius: float = 0.25

    def __post_init__(self):
        if min(self.search_radius, self.max_elevation_diff, self.max_slope, self.footprint_radius) <= 0:
            raise ValueError("landing parameters must be positive")
        if not 0 < self.min_traversability <= 1:
            raise ValueError("min_traversability must lie in (0, 1]")


def spiral_offsets(radius: float, count: int, turns: float = 2.0) -> np.ndarray:
    """``count`` points on an Archimedean spiral reaching ``radius``."""
    k = np.arange(1, count + 1)
    r = radius * k / count
    theta = 2 * math.pi * turns * k / count
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


def detect_cliff(gmap: GridMap, start, goal, w: PlanWeights, p: CliffParams,
                 costs: np.ndarray | None = None) -> CliffResult:
    """Declare a cliff when even the cheapest perturbed goal costs too much.

    A goal reachable under the threshold is kept as is; otherwise the goal is
    perturbed along a fixed spiral and the cheapest candidate wins.
    """
    if not gmap.contains_position(*start):
        raise OutOfMapError(f"start {tuple(start)} is outside the map")
    goal = (float(goal[0]), float(goal[1]))
    candidates = [goal] + [(goal[0] + float(dx), goal[1] + float(dy)) for dx, dy in spiral_offsets(p.radius, p.count, p.turns)]
    candidates = [c for c in candidates if gmap.contains_position(*c)]
    if costs is None:
        costs = cost_grid(gmap, w)
    paths = plan_to_many(gmap, start, candidates, w, costs=costs)
    if candidates and candidates[0] == goal and paths[0] is not None and paths[0].cost <= p.threshold:
        return CliffResult(False, goal, paths[0].cost, paths[0])
    best, best_path = goal, None
    for cand, path in zip(candidates, paths):
        if path is not None and (best_path is None or path.cost < best_path.cost):
            best, best_path = cand, path
    best_cost = math.inf if best_path is None else best_path.cost
    return CliffResult(best_cost > p.threshold, best, best_cost, best_path)


def elevation_moments(h, dx, dy) -> np.ndarray:
    """Height-weighted second moments about the center cell, as a 2x2 matrix.

    Each entry is ``(1/N) * sum(h * u * v)`` with ``N`` the number of cells.
    Sums are exactly rounded so the result does not depend on cell order.
    """
    h = np.asarray(h, dtype=float)
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    n = len(h)
    # coordinate products first so swapping or negating axes is exact
    sxx = math.fsum(h * (dx * dx)) / n
    syy = math.fsum(h * (dy * dy)) / n
    sxy = math.fsum(h * (dx * dy)) / n
    return np.array([[sxx, sxy], [sxy, syy]])


def sym2_eigenvalues(cov) -> tuple[float, float]:
    """(larger, smaller) eigenvalue of a symmetric 2x2 matrix, closed form."""
    a, b, c = float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 1])
    mean = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    return mean + rad, mean - rad


def peakness_from_moments(cov, floor: float = PEAKNESS_FLOOR) -> float:
    return 1.0 / max(sym2_eigenvalues(cov)[0], floor)


def _neighborhood(gmap: GridMap, idx, radius: float, layer: str):
    elev = gmap[layer]
    r, c = idx
    offs = disc_offsets(radius, gmap.resolution)
    rr, cc = r + offs[:, 0], c + offs[:, 1]
    inside = (rr >= 0) & (rr < gmap.dims[0]) & (cc >= 0) & (cc < gmap.dims[1])
    offs, rr, cc = offs[inside], rr[inside], cc[inside]
    vals = elev[rr, cc]
    ok = ~np.isnan(vals)
    return offs[ok], vals[ok]


def peakness(gmap: GridMap, idx, radius: float, layer: str = "elevation",
             floor: float = PEAKNESS_FLOOR, min_mass: float = MIN_MASS) -> AnchorCandidate | None:
    """Peakness of cell ``idx``, or None when the cell is not a candidate.

    A candidate is valid, strictly higher than every other valid cell within
    ``radius``, has at least five valid neighbors and a neighborhood whose
    summed relative height reaches ``min_mass``.
    """
    r, c = idx
    if not gmap.contains_index(r, c):
        raise OutOfMapError(f"index {tuple(idx)} is outside the map")
    center = gmap[layer][r, c]
    if np.isnan(center):
        return None
    offs, vals = _neighborhood(gmap, idx, radius, layer)
    is_center = (offs[:, 0] == 0) & (offs[:, 1] == 0)
    others = vals[~is_center]
    if len(others) < MIN_NEIGHBORS or not (center > others.max()):
        return None
    h = vals - vals.min()
    if math.fsum(h) < min_mass:
        return None
    res = gmap.resolution
    cov = elevation_moments(h, offs[:, 1] * res, offs[:, 0] * res)
    big, small = sym2_eigenvalues(cov)
    return AnchorCandidate(
        cell=CellIndex(int(r), int(c)),
        xy=gmap.index_to_position((r, c)),
        peakness=1.0 / max(big, floor),
        covariance=cov,
        sigma_l2=big,
        sigma_s2=small,
        radius=radius,
        height=float(center - vals.min()),
    )


def _strict_local_maxima(elev: np.ndarray, radius: float, resolution: float) -> np.ndarray:
    valid = ~np.isnan(elev)
    foot = disc_footprint(radius, resolution)
    k = foot.shape[0] // 2
    foot = foot.copy()
    foot[k, k] = False
    filled = np.where(valid, elev, -np.inf)
    others = ndimage.maximum_filter(filled, footprint=foot, mode="constant", cval=-np.inf)
    return valid & (filled > others)


def detect_anchor(gmap: GridMap, region_center, region_radius: float, peakness_threshold: float,
                  neighborhood_radius: float, layer: str = "elevation",
                  min_height: float = 0.0) -> AnchorCandidate | None:
    """Most peaked eligible cell in the region whose peakness exceeds the threshold.

    ``min_height`` additionally requires the cell to rise that far above the
    lowest cell of its neighborhood (0 disables the check).
    """
    elev = gmap[layer]
    X, Y = gmap.cell_centers()
    in_region = np.hypot(X - region_center[0], Y - region_center[1]) <= region_radius + 1e-9
    eligible = in_region & _strict_local_maxima(elev, neighborhood_radius, gmap.resolution)
    best = None
    for r, c in zip(*np.nonzero(eligible)):  # row-major, so ties keep the lower index
        cand = peakness(gmap, (int(r), int(c)), neighborhood_radius, layer)
        if cand is None or cand.height < min_height or cand.peakness <= peakness_threshold:
            continue
        if best is None or cand.peakness > best.peakness:
            best = cand
    return best


def landing_ok(gmap: GridMap, idx, p: LandingParams) -> bool:
    """All four landing conditions over the footprint disc around ``idx``."""
    elev = elevation_layer(gmap)
    offs = disc_offsets(p.footprint_radius, gmap.resolution)
    rr, cc = idx[0] + offs[:, 0], idx[1] + offs[:, 1]
    if rr.min() < 0 or cc.min() < 0 or rr.max() >= gmap.dims[0] or cc.max() >= gmap.dims[1]:
        return False
    z = elev[rr, cc]
    slope = gmap[SLOPE][rr, cc]
    trav = gmap[TRAVERSABILITY][rr, cc]
    if np.isnan(z).any() or np.isnan(slope).any() or np.isnan(trav).any():
        return False
    return bool(
        z.max() - z.min() <= p.max_elevation_diff
        and slope.max() <= p.max_slope
        and trav.min() >= p.min_traversability
    )


def find_landing_pose(gmap: GridMap, uav_pos, p: LandingParams) -> tuple[float, float] | None:
    """Nearest cell to ``uav_pos`` (within the search radius) fit for landing."""
    X, Y = gmap.cell_centers()
    dist = np.hypot(X - uav_pos[0], Y - uav_pos[1]).ravel()
    inside = np.nonzero(dist <= p.search_radius + 1e-9)[0]
    order = inside[np.lexsort((inside, dist[inside]))]
    cols = gmap.dims[1]
    for flat in order:
        idx = divmod(int(flat), cols)
        if landing_ok(gmap, idx, p):
            return gmap.index_to_position(idx)
    return None
