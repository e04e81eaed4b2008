"""Tether geometry, the pole-winding maneuver, hook-catch model and winch climb."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from .world import Pole, WorldModel, sample_height

N_BINS = 18
BIN_WIDTH = 20.0


@dataclass
class HookModel:
    """Hook-catch success probability per 20-degree revolution-angle bin."""

    probabilities: np.ndarray
    trials: np.ndarray = field(default_factory=lambda: np.zeros(N_BINS, dtype=int))
    bin_width: float = BIN_WIDTH

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        self.trials = np.asarray(self.trials, dtype=int)
        if self.probabilities.shape != (N_BINS,) or self.trials.shape != (N_BINS,):
            raise ValueError(f"hook model needs exactly {N_BINS} bins")
        if np.any((self.probabilities < 0) | (self.probabilities > 1)):
            raise ValueError("hook probabilities must lie in [0, 1]")

    @classmethod
    def default(cls) -> "HookModel":
        """Synthetic calibration: cosine bumps peaking at 0 and 180 deg, floor 0.1.

        Not measured data; the shape only mirrors the qualitative finding
        that catching works best near 0 and 180 degrees.
        """
        starts = np.radians(np.arange(N_BINS) * BIN_WIDTH)
        return cls(0.1 + 0.8 * np.cos(starts) ** 2, np.zeros(N_BINS, dtype=int))

    @classmethod
    def from_csv(cls, path) -> "HookModel":
        probs = np.full(N_BINS, np.nan)
        trials = np.zeros(N_BINS, dtype=int)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                start = float(row["bin_start_deg"])
                k = int(round(start / BIN_WIDTH))
                if not math.isclose(k * BIN_WIDTH, start) or not 0 <= k < N_BINS:
                    raise ValueError(f"{path}: bad bin_start_deg {start}")
                probs[k] = float(row["probability"])
                trials[k] = int(row.get("trials") or 0)
        if np.isnan(probs).any():
            raise ValueError(f"{path}: every 20-degree bin must be listed")
        return cls(probs, trials)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_start_deg", "probability", "trials"])
            for k in range(N_BINS):
                w.writerow([f"{k * self.bin_width:g}", repr(float(self.probabilities[k])), int(self.trials[k])])

    def bin_of(self, angle_deg: float) -> int:
        return int(angle_deg // self.bin_width) % N_BINS

    def probability(self, angle_deg: float) -> float:
        return float(self.probabilities[self.bin_of(angle_deg)])


def sample_hook_catch(model: HookModel, revolution_angle: float, rng: np.random.Generator) -> bool:
    if not 0.0 <= revolution_angle < 360.0:
        raise ValueError("revolution angle must lie in [0, 360)")
    return bool(rng.random() < model.probability(revolution_angle))


@dataclass
class WindingPlan:
    center: tuple[float, float]
    radius: float
    altitude: float
    revolution_angle: float
    start_bearing: float
    waypoints: np.ndarray  # (n, 3)

    @property
    def swept_angle(self) -> float:
        return 360.0 + self.revolution_angle


def circle_trajectory(pole_xy, pole_radius: float, flight_radius: float, altitude: float,
                      revolution_angle: float, step: float, uav_xy) -> WindingPlan:
    """Counter-clockwise circle around the pole, one full turn plus ``revolution_angle``.

    The entry waypoint lies on the line from the UAV to the pole center.
    """
    if flight_radius <= pole_radius:
        raise ValueError("flight radius must exceed the pole radius")
    if step <= 0:
        raise ValueError("step must be > 0")
    cx, cy = pole_xy
    start = math.atan2(uav_xy[1] - cy, uav_xy[0] - cx)
    total = 360.0 + revolution_angle
    n = int(math.ceil(total / step - 1e-9))
    sweep = np.minimum(np.arange(n + 1) * step, total)
    bearings = start + np.radians(sweep)
    wps = np.stack([
        cx + flight_radius * np.cos(bearings),
        cy + flight_radius * np.sin(bearings),
        np.full(n + 1, float(altitude)),
    ], axis=1)
    return WindingPlan((cx, cy), flight_radius, altitude, revolution_angle, start, wps)


# -- tether geometry ---------------------------------------------------------

@dataclass
class TetherState:
    """Taut tether from the UGV winch, around any wrap points, to its free end.

    ``deployed`` is the length paid out by the winch, ``wound`` what is still
    on the drum; their sum stays equal to ``total``.
    """

    start: np.ndarray
    end: np.ndarray
    total: float
    deployed: float = 0.0
    wraps: list = field(default_factory=list)
    wrapped_pole: int | None = None
    anchored: bool = False

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        self.end = np.asarray(self.end, dtype=float)
        self.deployed = max(self.deployed, self.polyline_length())
        if self.deployed > self.total:
            raise ValueError("initial tether span exceeds total tether length")

    @property
    def wound(self) -> float:
        return self.total - self.deployed

    @property
    def points(self) -> list[np.ndarray]:
        return [self.start, *self.wraps, self.end]

    def polyline_length(self) -> float:
        pts = np.array(self.points)
        return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())

    def wrapped_length(self) -> float:
        """Length from the first wrap point to the free end (0 without wraps)."""
        if not self.wraps:
            return 0.0
        pts = np.array([*self.wraps, self.end])
        return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())

    @property
    def anchor(self) -> np.ndarray | None:
        return self.wraps[0] if self.wraps else None


def _tangent_angles(center, radius: float, p) -> tuple[float, float] | None:
    dx, dy = p[0] - center[0], p[1] - center[1]
    d = math.hypot(dx, dy)
    if d <= radius:
        return None
    phi = math.atan2(dy, dx)
    beta = math.acos(radius / d)
    return phi - beta, phi + beta


def _angdiff(a: float, b: float) -> float:
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


def _segment_crossing(q, u, pole: Pole):
    """Parameter and distance of the closest approach of segment q->u to the pole axis."""
    c = np.asarray(pole.center, dtype=float)
    a = np.asarray(q[:2], dtype=float)
    ab = np.asarray(u[:2], dtype=float) - a
    L2 = float(ab @ ab)
    s = 0.0 if L2 == 0 else min(1.0, max(0.0, float((c - a) @ ab) / L2))
    closest = a + s * ab
    return s, float(np.hypot(*(closest - c)))


def wrap_angle(t: TetherState, pole: Pole) -> float:
    """Signed angle (rad) swept around the pole axis by the wrap points."""
    if len(t.wraps) < 2:
        return 0.0
    ang = [math.atan2(w[1] - pole.center[1], w[0] - pole.center[0]) for w in t.wraps]
    return float(np.sum(np.diff(np.unwrap(ang))))


def update_tether(t: TetherState, ugv, uav, world: WorldModel) -> TetherState:
    """Move the tether ends and insert wrap points where it catches on a pole.

    Only the free span (last wrap point to UAV) is tested. A crossing counts
    when the span's horizontal projection enters the pole disc below the pole
    top. Wrap points sit on the pole surface and are never removed. The winch
    pays out whatever extra length the new geometry needs.
    """
    t.start = np.asarray(ugv, dtype=float)
    if not t.anchored:
        t.end = np.asarray(uav, dtype=float)
        q = t.wraps[-1] if t.wraps else t.start
        u = t.end
        poles = world.poles if t.wrapped_pole is None else [world.poles[t.wrapped_pole]]
        for pole in poles:
            s, dist = _segment_crossing(q, u, pole)
            z_cross = q[2] + s * (u[2] - q[2])
            if dist >= pole.radius * (1 - 1e-9) or z_cross > pole.top:
                continue
            tu = _tangent_angles(pole.center, pole.radius, u)
            if tu is None:
                continue
            z = min(max(z_cross, pole.base), pole.top)
            new = []
            if t.wraps:
                qa = math.atan2(q[1] - pole.center[1], q[0] - pole.center[0])
                au = min(tu, key=lambda a: _angdiff(a, qa))
            else:
                tq = _tangent_angles(pole.center, pole.radius, q)
                if tq is None:
                    continue
                aq, au = min(((a, b) for a in tq for b in tu), key=lambda ab: _angdiff(*ab))
                new.append(aq)
            new.append(au)
            for a in new:
                new_pt = np.array([pole.center[0] + pole.radius * math.cos(a),
                                   pole.center[1] + pole.radius * math.sin(a), z])
                if not t.wraps or np.linalg.norm(new_pt - t.wraps[-1]) > 1e-9:
                    t.wraps.append(new_pt)
            t.wrapped_pole = world.poles.index(pole)
            break
    length = t.polyline_length()
    if length > t.deployed:
        t.deployed = min(length, t.total)
    return t


# -- winch climb -------------------------------------------------------------

@dataclass
class ClimbStep:
    position: np.ndarray
    free_length: float
    climbed: bool
    stalled: bool


def winch_climb_step(ugv, anchor, world: WorldModel, wind_rate: float, dt: float,
                     free_length: float, footprint_radius: float = 0.3) -> ClimbStep:
    """Quasi-static climb: wind in ``wind_rate * dt`` and drag the UGV along.

    The UGV slides along the terrain on the horizontal line toward the
    anchor until its straight-line distance to the anchor fits within the
    remaining free tether. No feasible point on that line means a stall.
    """
    p = np.asarray(ugv, dtype=float)
    a = np.asarray(anchor, dtype=float)
    dh = float(np.hypot(*(a[:2] - p[:2])))
    if dh < footprint_radius:
        return ClimbStep(p.copy(), free_length, True, False)
    length = max(free_length - wind_rate * dt, 0.0)
    u = (a[:2] - p[:2]) / dh

    def dist(s):
        xy = p[:2] + s * u
        z = sample_height(world, xy[0], xy[1])
        return math.dist((xy[0], xy[1], z), a), z

    d0, _ = dist(0.0)
    if d0 <= length:
        return ClimbStep(p.copy(), length, False, False)
    ds = world.resolution / 4
    lo, hi = 0.0, None
    s = ds
    while s <= dh + 1e-12:
        if dist(s)[0] <= length:
            hi = s
            break
        lo = s
        s += ds
    if hi is None:
        return ClimbStep(p.copy(), length, False, True)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if dist(mid)[0] <= length:
            hi = mid
        else:
            lo = mid
    xy = p[:2] + hi * u
    new = np.array([xy[0], xy[1], dist(hi)[1]])
    climbed = float(np.hypot(*(a[:2] - xy))) < footprint_radius
    return ClimbStep(new, length, climbed, False)


def load_hook_model(path: str | FsPath | None) -> HookModel:
    return HookModel.default() if path is None else HookModel.from_csv(path)
