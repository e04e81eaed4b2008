"""Grid path planning (A*), pure-pursuit tracking and a waypoint flight step."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .gridmap import CellIndex, GridMap
from .mapfilter import TRAVERSABILITY, elevation_layer

_NEIGHBORS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
# keeps the heuristic strictly below the true cost despite float rounding
_H_SHRINK = 1.0 - 1e-9


@dataclass(frozen=True)
class PlanWeights:
    w_t: float = 1.0
    w_e: float = 0.5
    w_nan: float = 1e3
    eps_t: float = 0.01

    def __post_init__(self):
        if min(self.w_t, self.w_e, self.w_nan) < 0:
            raise ValueError("plan weights must be >= 0")
        if self.eps_t <= 0:
            raise ValueError("eps_t must be > 0")

    def scaled(self, factor: float) -> "PlanWeights":
        return PlanWeights(self.w_t * factor, self.w_e * factor, self.w_nan * factor, self.eps_t)

    def max_valid_cost(self, elevation_range: float) -> float:
        """Largest cost any valid cell can take given the map's elevation span."""
        return self.w_t / self.eps_t + self.w_e * elevation_range


@dataclass
class Path:
    cells: list[CellIndex]
    waypoints: np.ndarray
    cost: float

    def __len__(self):
        return len(self.cells)


@dataclass(frozen=True)
class PursuitParams:
    lookahead: float = 0.4
    speed: float = 0.3
    max_angular_rate: float = 1.5

    def __post_init__(self):
        if self.lookahead <= 0:
            raise ValueError("lookahead must be > 0")


def cost_grid(gmap: GridMap, w: PlanWeights) -> np.ndarray:
    """Per-cell traversal cost for the whole map.

    Valid cells cost ``w_t / (T + eps_t) + w_e * E`` where ``E`` is the
    elevation above the lowest valid cell; cells missing either layer cost
    ``w_nan``.
    """
    trav = gmap[TRAVERSABILITY]
    elev = elevation_layer(gmap)
    valid = ~np.isnan(trav) & ~np.isnan(elev)
    cost = np.full(gmap.dims, float(w.w_nan))
    if valid.any():
        rel = elev[valid] - elev[valid].min()
        cost[valid] = w.w_t / (trav[valid] + w.eps_t) + w.w_e * rel
    return cost


def cell_cost(gmap: GridMap, idx, w: PlanWeights) -> float:
    return float(cost_grid(gmap, w)[tuple(idx)])


def path_cost(costs: np.ndarray, cells) -> float:
    """Sum of per-cell costs of every cell entered after the start."""
    total = 0.0
    for cell in cells[1:]:
        total += float(costs[tuple(cell)])
    return total


def _search(costs: np.ndarray, start: int, goal: int | None, heuristic: bool):
    """Best-first search over the 8-connected grid with lexicographic cost.

    Paths are ranked by (total cost, cell count, diagonal moves, parent
    index), so among equal-cost paths the geometrically shortest wins. With
    ``goal`` None the search runs to exhaustion (Dijkstra from ``start``).
    """
    rows, cols = costs.shape
    c = costs.ravel().tolist()
    n_cells = rows * cols
    inf = math.inf
    g = [inf] * n_cells
    steps = [0] * n_cells
    diags = [0] * n_cells
    parent = [-1] * n_cells
    g[start] = 0.0
    if heuristic and goal is not None:
        finite = costs[np.isfinite(costs)]
        cmin = float(finite.min()) * _H_SHRINK if finite.size else 0.0
        gr, gc = divmod(goal, cols)

        def h(v):
            r, q = divmod(v, cols)
            return cmin * max(abs(r - gr), abs(q - gc))
    else:
        def h(v):
            return 0.0

    heap = [(h(start), 0, 0, start, 0.0)]
    while heap:
        _, n_u, d_u, u, g_u = heapq.heappop(heap)
        if g_u != g[u] or n_u != steps[u] or d_u != diags[u]:
            continue
        if u == goal:
            break
        r, q = divmod(u, cols)
        for dr, dq in _NEIGHBORS:
            rr, qq = r + dr, q + dq
            if rr < 0 or rr >= rows or qq < 0 or qq >= cols:
                continue
            v = rr * cols + qq
            cv = c[v]
            if cv == inf:
                continue
            ng = g_u + cv
            nn = n_u + 1
            nd = d_u + (dr != 0 and dq != 0)
            gv = g[v]
            if ng < gv or (ng == gv and (nn, nd, u) < (steps[v], diags[v], parent[v])):
                g[v] = ng
                steps[v] = nn
                diags[v] = nd
                parent[v] = u
                heapq.heappush(heap, (ng + h(v), nn, nd, v, ng))
    return g, parent


def _extract(gmap: GridMap, g, parent, start: int, goal: int) -> Path | None:
    if g[goal] == math.inf:
        return None
    cols = gmap.dims[1]
    chain = [goal]
    while chain[-1] != start:
        chain.append(parent[chain[-1]])
    chain.reverse()
    cells = [CellIndex(*divmod(v, cols)) for v in chain]
    wps = np.array([gmap.index_to_position(cell) for cell in cells])
    return Path(cells, wps, g[goal])


def _flat_index(gmap: GridMap, xy) -> int | None:
    row, col = gmap.index_arrays(*xy)
    row, col = int(row), int(col)
    if not gmap.contains_index(row, col):
        return None
    return row * gmap.dims[1] + col


def astar_plan(gmap: GridMap, start, goal, w: PlanWeights, costs: np.ndarray | None = None) -> Path | None:
    """Minimum-cost 8-connected path from ``start`` to ``goal`` (world xy).

    Returns None when either endpoint is off the map or the goal cannot be
    reached (only possible with an infinite ``w_nan``).
    """
    if costs is None:
        costs = cost_grid(gmap, w)
    s, t = _flat_index(gmap, start), _flat_index(gmap, goal)
    if s is None or t is None:
        return None
    g, parent = _search(costs, s, t, heuristic=True)
    return _extract(gmap, g, parent, s, t)


def plan_to_many(gmap: GridMap, start, goals, w: PlanWeights, costs: np.ndarray | None = None):
    """One exhaustive search from ``start``; a Path (or None) per goal."""
    if costs is None:
        costs = cost_grid(gmap, w)
    s = _flat_index(gmap, start)
    if s is None:
        return [None] * len(goals)
    g, parent = _search(costs, s, None, heuristic=False)
    out = []
    for goal in goals:
        t = _flat_index(gmap, goal)
        out.append(None if t is None else _extract(gmap, g, parent, s, t))
    return out


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def lookahead_target(path, pose, lookahead: float):
    """Lookahead point and heading error to it, or None once within half the
    lookahead of the final waypoint."""
    wps = np.asarray(path.waypoints if isinstance(path, Path) else path, dtype=float)
    if len(wps) == 0:
        raise ValueError("path must not be empty")
    x, y, yaw = pose
    d = np.hypot(wps[:, 0] - x, wps[:, 1] - y)
    if d[-1] < 0.5 * lookahead:
        return None
    nearest = int(np.argmin(d))
    ahead = np.nonzero(d[nearest:] >= lookahead)[0]
    target = wps[nearest + ahead[0]] if ahead.size else wps[-1]
    alpha = _wrap(math.atan2(target[1] - y, target[0] - x) - yaw)
    return target, alpha


def pure_pursuit_step(path, pose, p: PursuitParams):
    """Velocity command ``(v, omega, done)`` steering toward the lookahead point.

    ``path`` is a Path or an (n, 2) array of waypoints; ``pose`` is (x, y, yaw).
    """
    hit = lookahead_target(path, pose, p.lookahead)
    if hit is None:
        return 0.0, 0.0, True
    alpha = hit[1]
    v = p.speed
    omega = 2.0 * v * math.sin(alpha) / p.lookahead
    omega = max(-p.max_angular_rate, min(p.max_angular_rate, omega))
    return v, omega, False


def corridor_max_elevation(gmap: GridMap, start_xy, end_xy, half_width: float):
    """Max raw elevation over cells near the segment; unknown cells count as the
    highest elevation known anywhere on the map. None when nothing is known."""
    elev = gmap["elevation"]
    if np.isnan(elev).all():
        return None
    X, Y = gmap.cell_centers()
    a = np.asarray(start_xy, dtype=float)
    b = np.asarray(end_xy, dtype=float)
    ab = b - a
    L2 = float(ab @ ab)
    if L2 > 0:
        s = np.clip(((X - a[0]) * ab[0] + (Y - a[1]) * ab[1]) / L2, 0.0, 1.0)
    else:
        s = np.zeros_like(X)
    dist = np.hypot(X - (a[0] + s * ab[0]), Y - (a[1] + s * ab[1]))
    band = dist <= half_width + 0.5 * gmap.resolution
    vals = elev[band]
    known_max = float(np.nanmax(elev))
    if np.isnan(vals).any():
        return known_max
    return float(vals.max()) if vals.size else known_max


def uav_goto_step(gmap: GridMap, uav_pos, target, clearance: float, speed: float = 0.5,
                  dt: float = 0.2, lookahead: float = 1.5, half_width: float = 0.4,
                  climb_rate: float = 0.8, ground: float = 0.0) -> np.ndarray:
    """Advance the UAV one step toward ``target`` at terrain-following altitude.

    The commanded altitude is the corridor maximum plus ``clearance``. The
    UAV climbs before moving on whenever it is below that altitude.
    """
    pos = np.asarray(uav_pos, dtype=float).copy()
    tgt = np.asarray(target, dtype=float)[:2]
    delta = tgt - pos[:2]
    dist = float(np.hypot(*delta))
    direction = delta / dist if dist > 0 else np.zeros(2)
    ahead = pos[:2] + direction * min(dist + half_width, lookahead)
    top = corridor_max_elevation(gmap, pos[:2], ahead, half_width)
    alt = (ground if top is None else top) + clearance
    dz = alt - pos[2]
    pos[2] += max(-climb_rate * dt, min(climb_rate * dt, dz))
    if pos[2] >= alt - 0.05 and dist > 0:
        pos[:2] += direction * min(speed * dt, dist)
    return pos
