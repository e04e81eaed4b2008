"""Ground-truth synthetic terrain and a simulated depth (ToF) sensor.

Coordinates are world-frame, z up. Heightfield nodes sit on a regular grid:
``heightfield[row, col]`` is the elevation at ``origin + (col, row) * resolution``.

Orientation angles follow a ZYX (yaw, pitch, roll) order with pitch positive
nose-up, so a sensor looking straight down has ``pitch = -pi/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InvalidPositionError(ValueError):
    """Raised when a query falls outside the world bounds."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box obstacle. Acts as a vertical prism up to its top face."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]

    @property
    def top(self) -> float:
        return self.center[2] + 0.5 * self.size[2]

    @property
    def xy_bounds(self) -> tuple[float, float, float, float]:
        cx, cy, _ = self.center
        hx, hy = 0.5 * self.size[0], 0.5 * self.size[1]
        return cx - hx, cx + hx, cy - hy, cy + hy

    def covers(self, x, y):
        x0, x1, y0, y1 = self.xy_bounds
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


@dataclass(frozen=True)
class Pole:
    """Vertical cylinder standing on ``base`` elevation."""

    center: tuple[float, float]
    radius: float
    base: float
    height: float

    @property
    def top(self) -> float:
        return self.base + self.height

    def covers(self, x, y):
        return (x - self.center[0]) ** 2 + (y - self.center[1]) ** 2 <= self.radius**2


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def rotation(self) -> np.ndarray:
        """Body-to-world rotation matrix, Rz(yaw) Ry(-pitch) Rx(roll)."""
        cr, sr = math.cos(self.roll), math.sin(self.roll)
        cp, sp = math.cos(-self.pitch), math.sin(-self.pitch)
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
        ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
        rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
        return rz @ ry @ rx


@dataclass(frozen=True)
class SensorSpec:
    h_fov: float = math.radians(60.0)
    v_fov: float = math.radians(45.0)
    angular_resolution: float = math.radians(1.0)
    max_range: float = 5.0
    noise_std: float = 0.0
    rate: float = 5.0

    def __post_init__(self):
        for name in ("h_fov", "v_fov"):
            fov = getattr(self, name)
            if not 0.0 < fov <= math.pi:
                raise ValueError(f"{name} must lie in (0, pi], got {fov}")
        if self.angular_resolution <= 0:
            raise ValueError("angular_resolution must be > 0")
        if self.max_range <= 0:
            raise ValueError("max_range must be > 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.rate <= 0:
            raise ValueError("rate must be > 0")

    def ray_angles(self) -> tuple[np.ndarray, np.ndarray]:
        n_h = int(round(self.h_fov / self.angular_resolution)) + 1
        n_v = int(round(self.v_fov / self.angular_resolution)) + 1
        az = np.linspace(-0.5 * self.h_fov, 0.5 * self.h_fov, n_h)
        el = np.linspace(-0.5 * self.v_fov, 0.5 * self.v_fov, n_v)
        return az, el


@dataclass
class PointCloud:
    points: np.ndarray
    origin: np.ndarray

    def __len__(self):
        return len(self.points)


@dataclass
class WorldModel:
    heightfield: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)
    obstacles: list[Box] = field(default_factory=list)
    poles: list[Pole] = field(default_factory=list)

    def __post_init__(self):
        self.heightfield = np.asarray(self.heightfield, dtype=float)
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        if self.heightfield.ndim != 2 or min(self.heightfield.shape) < 2:
            raise ValueError("heightfield must be a 2D array with at least 2x2 nodes")
        if not np.all(np.isfinite(self.heightfield)):
            raise ValueError("heightfield must be finite everywhere")
        for pole in self.poles:
            if pole.radius <= 0 or pole.height <= 0:
                raise ValueError(f"pole {pole} must have positive radius and height")
            if not self.in_bounds(*pole.center):
                raise ValueError(f"pole {pole} lies outside the world bounds")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) covered by the heightfield."""
        rows, cols = self.heightfield.shape
        x0, y0 = self.origin
        return (x0, x0 + (cols - 1) * self.resolution, y0, y0 + (rows - 1) * self.resolution)

    def in_bounds(self, x, y):
        xmin, xmax, ymin, ymax = self.bounds
        return (x >= xmin) & (x <= xmax) & (y >= ymin) & (y <= ymax)

    def terrain_height(self, x, y):
        """Bilinear heightfield elevation; NaN outside the bounds. Vectorized."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        rows, cols = self.heightfield.shape
        u = (x - self.origin[0]) / self.resolution
        v = (y - self.origin[1]) / self.resolution
        inside = (u >= 0) & (u <= cols - 1) & (v >= 0) & (v <= rows - 1)
        u = np.clip(np.nan_to_num(u), 0, cols - 1)
        v = np.clip(np.nan_to_num(v), 0, rows - 1)
        c0 = np.minimum(np.floor(u).astype(int), cols - 2)
        r0 = np.minimum(np.floor(v).astype(int), rows - 2)
        fu = u - c0
        fv = v - r0
        hf = self.heightfield
        h = (
            hf[r0, c0] * (1 - fu) * (1 - fv)
            + hf[r0, c0 + 1] * fu * (1 - fv)
            + hf[r0 + 1, c0] * (1 - fu) * fv
            + hf[r0 + 1, c0 + 1] * fu * fv
        )
        return np.where(inside, h, np.nan)

    def surface_height(self, x, y):
        """Vectorized max of terrain, obstacle tops and pole tops; NaN out of bounds."""
        h = self.terrain_height(x, y)
        for box in self.obstacles:
            h = np.where(box.covers(x, y), np.maximum(h, box.top), h)
        for pole in self.poles:
            h = np.where(pole.covers(x, y), np.maximum(h, pole.top), h)
        return h


def sample_height(world: WorldModel, x: float, y: float) -> float:
    if not world.in_bounds(x, y):
        raise InvalidPositionError(f"({x}, {y}) is outside world bounds {world.bounds}")
    return float(world.surface_height(x, y))


def ugv_ground_pose(world: WorldModel, x: float, y: float, heading: float,
                    footprint: float = 0.2) -> Pose:
    """Pose of a ground vehicle resting on the terrain at (x, y).

    Roll and pitch come from the terrain gradient measured by central
    differences across the footprint (clipped at the world border).
    Pitch is positive nose-up, roll positive when the left side is higher.
    """
    z = sample_height(world, x, y)
    xmin, xmax, ymin, ymax = world.bounds

    def diff(ax, ay):
        x0, y0 = min(max(x - ax, xmin), xmax), min(max(y - ay, ymin), ymax)
        x1, y1 = min(max(x + ax, xmin), xmax), min(max(y + ay, ymin), ymax)
        span = math.hypot(x1 - x0, y1 - y0)
        if span == 0:
            return 0.0
        return (float(world.terrain_height(x1, y1)) - float(world.terrain_height(x0, y0))) / span

    gx = diff(footprint, 0.0)
    gy = diff(0.0, footprint)
    g_fwd = gx * math.cos(heading) + gy * math.sin(heading)
    g_left = -gx * math.sin(heading) + gy * math.cos(heading)
    pitch = math.atan(g_fwd)
    roll = math.asin(g_left / math.sqrt(1.0 + gx * gx + gy * gy))
    return Pose(x, y, z, roll, pitch, heading)


# -- ray casting ------------------------------------------------------------

def _ray_boxes(o, d, boxes):
    t_best = np.full(len(d), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for box in boxes:
            x0, x1, y0, y1 = box.xy_bounds
            lo = np.array([x0, y0, -np.inf])
            hi = np.array([x1, y1, box.top])
            inv = 1.0 / d
            t1 = (lo - o) * inv
            t2 = (hi - o) * inv
            tmin = np.fmin(t1, t2)
            tmax = np.fmax(t1, t2)
            # axis with zero direction: inside slab -> unconstrained, outside -> miss
            par = d == 0
            inside = (o >= lo) & (o <= hi)
            tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
            tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
            t_near = tmin.max(axis=1)
            t_far = tmax.min(axis=1)
            hit = (t_near <= t_far) & (t_near > 0)
            t_best = np.where(hit & (t_near < t_best), t_near, t_best)
    return t_best


def _ray_poles(o, d, poles):
    t_best = np.full(len(d), np.inf)
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    for pole in poles:
        px, py = o[0] - pole.center[0], o[1] - pole.center[1]
        a = dx * dx + dy * dy
        b = 2 * (px * dx + py * dy)
        c = px * px + py * py - pole.radius**2
        disc = b * b - 4 * a * c
        with np.errstate(divide="ignore", invalid="ignore"):
            sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
            t_side = (-b - sq) / (2 * a)
            z_side = o[2] + t_side * dz
            side_ok = (disc >= 0) & (a > 0) & (t_side > 0) & (z_side <= pole.top)
            t_cap = (pole.top - o[2]) / dz
            cx = px + t_cap * dx
            cy = py + t_cap * dy
            cap_ok = (dz < 0) & (t_cap > 0) & (cx * cx + cy * cy <= pole.radius**2)
        t = np.fmin(np.where(side_ok, t_side, np.inf), np.where(cap_ok, t_cap, np.inf))
        t_best = np.minimum(t_best, t)
    return t_best


def _ray_terrain(world, o, d, t_limit, step):
    """First crossing of each ray below the heightfield, refined by bisection."""
    n = len(d)
    t_hit = np.full(n, np.inf)
    hmax = float(world.heightfield.max())
    hmin = float(world.heightfield.min())
    dz = d[:, 2]
    # rays can only meet terrain between the hmax and hmin planes
    with np.errstate(divide="ignore", invalid="ignore"):
        t_enter = np.where(dz < 0, (o[2] - hmax) / -dz, 0.0 if o[2] < hmax else np.inf)
        t_exit = np.where(dz < 0, (o[2] - hmin) / -dz, t_limit)
    if o[2] < hmax:
        t_enter = np.where(dz < 0, 0.0, t_enter)
    # back off one step so the first sample sits clearly above the terrain
    t_enter = np.maximum(t_enter - step, 0.0)
    t_exit = np.minimum(t_exit + step, t_limit)
    active = np.where(t_enter < t_exit)[0]
    if active.size == 0:
        return t_hit
    t0 = t_enter[active]
    n_steps = int(np.ceil((t_exit[active] - t0).max() / step)) + 1
    ts = t0[:, None] + step * np.arange(n_steps)[None, :]
    ts = np.minimum(ts, t_exit[active][:, None])
    da = d[active]
    px = o[0] + ts * da[:, 0:1]
    py = o[1] + ts * da[:, 1:2]
    pz = o[2] + ts * da[:, 2:3]
    below = pz < world.terrain_height(px, py)  # NaN terrain compares False
    crossed = below.any(axis=1)
    first = np.argmax(below, axis=1)
    rows = np.where(crossed & (first > 0))[0]
    if rows.size == 0:
        return t_hit
    lo = ts[rows, first[rows] - 1]
    hi = ts[rows, first[rows]]
    dr = da[rows]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        z = o[2] + mid * dr[:, 2]
        h = world.terrain_height(o[0] + mid * dr[:, 0], o[1] + mid * dr[:, 1])
        under = z < h
        hi = np.where(under, mid, hi)
        lo = np.where(under, lo, mid)
    t_hit[active[rows]] = hi
    return t_hit


def ray_directions(pose: Pose, spec: SensorSpec) -> np.ndarray:
    az, el = spec.ray_angles()
    A, E = np.meshgrid(az, el, indexing="ij")
    local = np.stack(
        [np.cos(E) * np.cos(A), np.cos(E) * np.sin(A), np.sin(E)], axis=-1
    ).reshape(-1, 3)
    return local @ pose.rotation().T


def cast_rays(world: WorldModel, origin: np.ndarray, dirs: np.ndarray, max_range: float) -> np.ndarray:
    """Exact hit distance per ray (inf on miss or beyond ``max_range``)."""
    t = np.minimum(_ray_boxes(origin, dirs, world.obstacles), _ray_poles(origin, dirs, world.poles))
    t_limit = max_range
    t_ter = _ray_terrain(world, origin, dirs, t_limit, world.resolution / 2)
    t = np.minimum(t, t_ter)
    return np.where(t <= max_range, t, np.inf)


def render_depth_pointcloud(world: WorldModel, sensor_pose: Pose, spec: SensorSpec,
                            rng: np.random.Generator) -> PointCloud:
    if not world.in_bounds(sensor_pose.x, sensor_pose.y):
        raise InvalidPositionError(f"sensor at ({sensor_pose.x}, {sensor_pose.y}) is out of bounds")
    origin = sensor_pose.position
    dirs = ray_directions(sensor_pose, spec)
    t = cast_rays(world, origin, dirs, spec.max_range)
    # one draw per ray keeps the stream aligned regardless of hit pattern
    noise = rng.normal(0.0, 1.0, len(dirs)) * spec.noise_std
    t_meas = t + noise
    keep = np.isfinite(t) & (t_meas > 0) & (t_meas <= spec.max_range)
    points = origin + t_meas[keep, None] * dirs[keep]
    return PointCloud(points=points, origin=origin)
