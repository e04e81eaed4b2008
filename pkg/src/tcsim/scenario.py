"""Scenario files: a single JSON document describing world, robots and parameters.

Unknown keys are rejected and every parameter block is checked at load time.
Relative file references (heightfield PGM, hook CSV) resolve against the
scenario file's directory.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import detect, mapfilter, planner
from .export import read_pgm
from .tether import HookModel
from .world import Box, Pole, SensorSpec, WorldModel

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Schema or invariant violation; the message names the offending field."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Feature(_Model):
    """Additive terrain primitive.

    plane: ``height += grade_x * x + grade_y * y``.
    step:  ``height += height`` where the ``axis`` coordinate >= ``at``.
    ramp:  linear rise of ``height`` from ``start`` to ``end`` along ``axis``,
           flat beyond ``end``.
    ``span`` (optional) limits step/ramp to ``[lo, hi]`` on the other axis.
    """

    type: Literal["plane", "step", "ramp"]
    axis: Literal["x", "y"] = "x"
    at: float = 0.0
    start: float = 0.0
    end: float = 1.0
    height: float = 0.0
    grade_x: float = 0.0
    grade_y: float = 0.0
    span: Optional[tuple[float, float]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.type == "ramp" and self.end <= self.start:
            raise ValueError("ramp end must be greater than start")
        if self.span is not None and self.span[1] <= self.span[0]:
            raise ValueError("span must be (lo, hi) with lo < hi")
        return self


class PgmSource(_Model):
    path: str
    scale: float = Field(gt=0)
    offset: float = 0.0


class Terrain(_Model):
    size: tuple[float, float]
    resolution: float = Field(0.05, gt=0)
    origin: tuple[float, float] = (0.0, 0.0)
    base: float = 0.0
    features: list[Feature] = []
    pgm: Optional[PgmSource] = None

    @field_validator("size")
    @classmethod
    def _positive(cls, v):
        if min(v) <= 0:
            raise ValueError("size must be positive")
        return v


class BoxSpec(_Model):
    center: tuple[float, float, float]
    size: tuple[float, float, float]

    @field_validator("size")
    @classmethod
    def _positive(cls, v):
        if min(v) <= 0:
            raise ValueError("box size must be positive")
        return v


class PoleSpec(_Model):
    center: tuple[float, float]
    radius: float = Field(gt=0)
    height: float = Field(gt=0)
    base: Optional[float] = None  # None: terrain height at the center


class WorldSpec(_Model):
    terrain: Terrain
    obstacles: list[BoxSpec] = []
    poles: list[PoleSpec] = []


class SensorConfig(_Model):
    h_fov_deg: float = Field(60.0, gt=0, le=180)
    v_fov_deg: float = Field(45.0, gt=0, le=180)
    resolution_deg: float = Field(1.0, gt=0)
    max_range: float = Field(5.0, gt=0)
    noise_std: float = Field(0.0, ge=0)
    rate: float = Field(5.0, gt=0)
    pitch_deg: float = -90.0

    def spec(self) -> SensorSpec:
        return SensorSpec(math.radians(self.h_fov_deg), math.radians(self.v_fov_deg),
                          math.radians(self.resolution_deg), self.max_range, self.noise_std, self.rate)


class PursuitConfig(_Model):
    lookahead: float = Field(0.4, gt=0)
    speed: float = Field(0.3, gt=0)
    max_angular_rate: float = Field(1.5, gt=0)


class UgvConfig(_Model):
    start: tuple[float, float]
    heading: float = 0.0
    footprint_radius: float = Field(0.25, gt=0)
    goal_tolerance: float = Field(0.3, gt=0)
    pursuit: PursuitConfig = PursuitConfig()


class UavConfig(_Model):
    clearance: float = Field(2.0, gt=0)
    speed: float = Field(0.5, gt=0)
    standoff: float = Field(3.0, gt=0)
    climb_rate: float = Field(0.8, gt=0)
    corridor_lookahead: float = Field(1.5, gt=0)
    corridor_half_width: float = Field(0.4, gt=0)
    sensor: SensorConfig = SensorConfig()


class MapConfig(_Model):
    resolution: float = Field(0.1, gt=0)
    update_period: float = Field(1.0, gt=0)


class FilterConfig(_Model):
    inpaint_radius: float = Field(0.2, gt=0)
    smooth_radius: float = Field(0.2, gt=0)
    slope_max: float = Field(0.6, gt=0)
    roughness_max: float = Field(0.1, gt=0)
    min_filter_radius: float = Field(0.3, gt=0)


class PlanConfig(_Model):
    w_t: float = Field(1.0, ge=0)
    w_e: float = Field(0.5, ge=0)
    w_nan: float = Field(1e3, ge=0)
    eps_t: float = Field(0.01, gt=0)


class CliffConfig(_Model):
    threshold: float = Field(300.0, gt=0)
    radius: float = Field(0.8, gt=0)
    count: int = Field(12, ge=1)


class AnchorConfig(_Model):
    region_radius: float = Field(2.0, gt=0)
    neighborhood_radius: float = Field(0.4, gt=0)
    peakness_threshold: float = Field(300.0, gt=0)
    min_height: float = Field(0.3, ge=0)
    cross_distance: float = Field(1.5, ge=0)
    search_timeout: float = Field(30.0, gt=0)


class LandingConfig(_Model):
    search_radius: float = Field(1.5, gt=0)
    max_elevation_diff: float = Field(0.05, gt=0)
    max_slope: float = Field(0.2, gt=0)
    min_traversability: float = Field(0.7, gt=0, le=1)
    footprint_radius: float = Field(0.25, gt=0)
    descent_rate: float = Field(0.5, gt=0)
    timeout: float = Field(20.0, gt=0)


class WindingConfig(_Model):
    flight_radius: float = Field(0.6, gt=0)
    altitude: float = Field(0.6, gt=0)  # above the ground at the anchor
    revolution_angle: float = Field(180.0, ge=0, lt=360)
    step_deg: float = Field(10.0, gt=0)
    speed: float = Field(0.5, gt=0)
    max_attempts: int = Field(3, ge=1)


class HookConfig(_Model):
    csv: Optional[str] = None
    probabilities: Optional[list[float]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.csv is not None and self.probabilities is not None:
            raise ValueError("give either csv or probabilities, not both")
        if self.probabilities is not None:
            HookModel(self.probabilities)
        return self


class TetherConfig(_Model):
    total_length: float = Field(40.0, gt=0)
    wind_rate: float = Field(0.2, gt=0)


class Scenario(_Model):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "scenario"
    seed: int = 0
    dt: float = Field(0.1, gt=0)
    max_ticks: int = Field(3000, ge=1)
    world: WorldSpec
    goal: tuple[float, float]
    ugv: UgvConfig
    uav: UavConfig = UavConfig()
    map: MapConfig = MapConfig()
    filter: FilterConfig = FilterConfig()
    plan: PlanConfig = PlanConfig()
    cliff: CliffConfig = CliffConfig()
    anchor: AnchorConfig = AnchorConfig()
    landing: LandingConfig = LandingConfig()
    winding: WindingConfig = WindingConfig()
    hook: HookConfig = HookConfig()
    tether: TetherConfig = TetherConfig()
    traversability_floor: float = Field(0.1, ge=0, le=1)

    # set by load_scenario; not part of the document
    _base_dir: Path = Path(".")

    @model_validator(mode="after")
    def _check(self):
        t = self.world.terrain
        xmin, ymin = t.origin
        xmax, ymax = xmin + t.size[0], ymin + t.size[1]

        def inside(p):
            return xmin <= p[0] <= xmax and ymin <= p[1] <= ymax

        for name, p in (("goal", self.goal), ("ugv.start", self.ugv.start)):
            if not inside(p):
                raise ValueError(f"{name} {p} lies outside the terrain")
        for i, pole in enumerate(self.world.poles):
            if not inside(pole.center):
                raise ValueError(f"world.poles.{i} lies outside the terrain")
        return self

    # -- builders ---------------------------------------------------------

    @property
    def base_dir(self) -> Path:
        return self._base_dir

    def build_world(self) -> WorldModel:
        t = self.world.terrain
        if t.pgm is not None:
            levels = read_pgm(self.base_dir / t.pgm.path)
            hf = t.pgm.offset + t.pgm.scale * levels.astype(float)
            res = t.resolution
        else:
            res = t.resolution
            cols = int(round(t.size[0] / res)) + 1
            rows = int(round(t.size[1] / res)) + 1
            xs = t.origin[0] + np.arange(cols) * res
            ys = t.origin[1] + np.arange(rows) * res
            X, Y = np.meshgrid(xs, ys)
            hf = np.full(X.shape, t.base, dtype=float)
            for f in t.features:
                hf += _feature_height(f, X, Y)
        world = WorldModel(hf, res, t.origin)
        world.obstacles = [Box(tuple(b.center), tuple(b.size)) for b in self.world.obstacles]
        poles = []
        for p in self.world.poles:
            base = p.base if p.base is not None else float(world.terrain_height(*p.center))
            poles.append(Pole(tuple(p.center), p.radius, base, p.height))
        return WorldModel(hf, res, t.origin, world.obstacles, poles)

    def filter_params(self) -> mapfilter.FilterParams:
        return mapfilter.FilterParams(**self.filter.model_dump())

    def plan_weights(self) -> planner.PlanWeights:
        return planner.PlanWeights(**self.plan.model_dump())

    def cliff_params(self) -> detect.CliffParams:
        return detect.CliffParams(**self.cliff.model_dump())

    def landing_params(self) -> detect.LandingParams:
        d = self.landing.model_dump()
        d.pop("descent_rate")
        d.pop("timeout")
        return detect.LandingParams(**d)

    def pursuit_params(self) -> planner.PursuitParams:
        return planner.PursuitParams(**self.ugv.pursuit.model_dump())

    def hook_model(self) -> HookModel:
        if self.hook.csv is not None:
            return HookModel.from_csv(self.base_dir / self.hook.csv)
        if self.hook.probabilities is not None:
            return HookModel(self.hook.probabilities)
        return HookModel.default()

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=False) + "\n"

    def with_overrides(self, **kw) -> "Scenario":
        new = self.model_copy(update=kw)
        new._base_dir = self._base_dir
        return new


def _feature_height(f: Feature, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if f.type == "plane":
        return f.grade_x * X + f.grade_y * Y
    along, across = (X, Y) if f.axis == "x" else (Y, X)
    if f.type == "step":
        out = np.where(along >= f.at, f.height, 0.0)
    else:
        out = f.height * np.clip((along - f.start) / (f.end - f.start), 0.0, 1.0)
    if f.span is not None:
        out = np.where((across >= f.span[0]) & (across <= f.span[1]), out, 0.0)
    return out


def _format_error(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_scenario(data: dict, base_dir: Path | str = ".") -> Scenario:
    try:
        sc = Scenario.model_validate(data)
    except ValidationError as err:
        raise ScenarioError(_format_error(err)) from None
    sc._base_dir = Path(base_dir)
    for ref, label in ((sc.world.terrain.pgm and sc.world.terrain.pgm.path, "world.terrain.pgm.path"),
                       (sc.hook.csv, "hook.csv")):
        if ref and not (sc.base_dir / ref).exists():
            raise ScenarioError(f"{label}: file {ref!r} not found")
    w = sc.plan_weights()
    t = sc.build_world()
    span = float(t.heightfield.max() - t.heightfield.min())
    span = max([span] + [b.top - t.heightfield.min() for b in t.obstacles] + [p.top - t.heightfield.min() for p in t.poles])
    if w.w_nan <= w.max_valid_cost(span):
        raise ScenarioError(
            f"plan.w_nan: must exceed the largest valid-cell cost {w.max_valid_cost(span):g} for this world")
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ScenarioError(f"<file>: invalid JSON ({err})") from None
    return parse_scenario(data, path.parent)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(sc.to_json())


def bundled(name: str) -> Path:
    """Path of a scenario file shipped with the package (e.g. ``"field_trial"``)."""
    return Path(__file__).parent / "data" / f"{name}.json"
