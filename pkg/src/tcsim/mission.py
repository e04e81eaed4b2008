"""Tick-deterministic UAV/UGV mission: tandem navigation up to a cliff, anchoring
the tether on a pole, landing, and the winch climb.
"""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import detect, mapfilter, planner
from .gridmap import GridMap, integrate_pointcloud
from .scenario import Scenario
from .tether import TetherState, circle_trajectory, sample_hook_catch, update_tether, winch_climb_step
from .world import Pose, render_depth_pointcloud, sample_height, ugv_ground_pose

log = logging.getLogger(__name__)


class MissionState(str, Enum):
    TANDEM = "TandemNavigate"
    CLIFF_CONFIRMED = "CliffConfirmed"
    UAV_CROSS = "UavCrossCliff"
    ANCHOR_SEARCH = "AnchorSearch"
    WIND_TETHER = "WindTether"
    LANDING_SEARCH = "LandingSearch"
    LANDED = "Landed"
    WINCH_CLIMB = "WinchClimb"
    DONE = "Done"
    FAILED = "Failed"


S = MissionState
TRANSITIONS = {
    S.TANDEM: {S.CLIFF_CONFIRMED, S.DONE, S.FAILED},
    S.CLIFF_CONFIRMED: {S.UAV_CROSS, S.FAILED},
    S.UAV_CROSS: {S.ANCHOR_SEARCH, S.FAILED},
    S.ANCHOR_SEARCH: {S.WIND_TETHER, S.FAILED},
    S.WIND_TETHER: {S.LANDING_SEARCH, S.FAILED},
    S.LANDING_SEARCH: {S.LANDED, S.FAILED},
    S.LANDED: {S.WINCH_CLIMB, S.FAILED},
    S.WINCH_CLIMB: {S.DONE, S.FAILED},
    S.DONE: set(),
    S.FAILED: set(),
}
TERMINAL = {S.DONE, S.FAILED}


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Independent stream per consumer, so adding one never shifts another."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def _f(v) -> list:
    return [float(x) for x in v]


@dataclass
class MissionLog:
    records: list = field(default_factory=list)
    outcome: str | None = None
    reason: str | None = None

    def states(self) -> list[str]:
        """State sequence with consecutive repeats collapsed."""
        seq = []
        for rec in self.records:
            if not seq or seq[-1] != rec["state"]:
                seq.append(rec["state"])
        return seq

    def events(self) -> list[dict]:
        return [ev for rec in self.records for ev in rec["events"]]


class Simulation:
    """All mutable mission state. ``step`` advances one tick of ``scenario.dt``."""

    def __init__(self, scenario: Scenario, seed: int | None = None, max_ticks: int | None = None):
        self.sc = scenario
        self.seed = scenario.seed if seed is None else seed
        self.max_ticks = scenario.max_ticks if max_ticks is None else max_ticks
        self.dt = scenario.dt
        self.world = scenario.build_world()
        self.map = GridMap.covering(self.world.bounds, scenario.map.resolution)
        self.filter_params = scenario.filter_params()
        self.weights = scenario.plan_weights()
        self.cliff_params = scenario.cliff_params()
        self.landing_params = scenario.landing_params()
        self.pursuit = scenario.pursuit_params()
        self.hook_model = scenario.hook_model()
        self.sensor = scenario.uav.sensor.spec()
        self.sensor_rng = named_rng(self.seed, "sensor")
        self.hook_rng = named_rng(self.seed, "hook")

        self.sensor_every = max(1, int(round(1.0 / (self.sensor.rate * self.dt))))
        self.map_every = max(1, int(round(scenario.map.update_period / self.dt)))

        sx, sy = scenario.ugv.start
        self.ugv = ugv_ground_pose(self.world, sx, sy, scenario.ugv.heading, scenario.ugv.footprint_radius)
        self.uav = np.array([sx, sy, self.ugv.z + 0.3])
        self.uav_airborne = True
        self.goal = np.asarray(scenario.goal, dtype=float)
        self.tether = TetherState(self.ugv.position, self.uav, scenario.tether.total_length)

        self.state = S.TANDEM
        self.reason: str | None = None
        self.tick = 0
        self.log = MissionLog()
        self.costs: np.ndarray | None = None
        self.ugv_path: planner.Path | None = None
        self.cliff: detect.CliffResult | None = None
        self.anchor: detect.AnchorCandidate | None = None
        self.winding: dict | None = None
        self.hook_attempts = 0
        self.landing_xy: tuple[float, float] | None = None
        self.free_length: float | None = None
        self.state_entered = 0.0
        self.cross_start: np.ndarray | None = None

    # -- helpers ------------------------------------------------------------

    @property
    def time(self) -> float:
        return self.tick * self.dt

    def _goto(self, new: MissionState, events: list, **info) -> None:
        assert new in TRANSITIONS[self.state], f"illegal transition {self.state.value} -> {new.value}"
        events.append({"type": "transition", "from": self.state.value, "to": new.value, **info})
        log.info("t=%.1f %s -> %s %s", self.time, self.state.value, new.value, info or "")
        self.state = new
        self.state_entered = self.time

    def _fail(self, reason: str, events: list) -> None:
        self.reason = reason
        self._goto(S.FAILED, events, reason=reason)

    def _fly_toward(self, target) -> None:
        u = self.sc.uav
        self.uav = planner.uav_goto_step(
            self.map, self.uav, target, u.clearance, u.speed, self.dt,
            u.corridor_lookahead, u.corridor_half_width, u.climb_rate)

    def _fly_straight(self, target, speed: float) -> bool:
        """Move in 3D toward ``target``; True once it is reached."""
        delta = np.asarray(target, dtype=float) - self.uav
        dist = float(np.linalg.norm(delta))
        stride = speed * self.dt
        if dist <= stride:
            self.uav = np.asarray(target, dtype=float).copy()
            return True
        self.uav = self.uav + delta * (stride / dist)
        return False

    def _sense(self) -> None:
        yaw = math.atan2(self.goal[1] - self.ugv.y, self.goal[0] - self.ugv.x)
        pose = Pose(self.uav[0], self.uav[1], self.uav[2], 0.0,
                    math.radians(self.sc.uav.sensor.pitch_deg), yaw)
        if not self.world.in_bounds(pose.x, pose.y):
            return
        cloud = render_depth_pointcloud(self.world, pose, self.sensor, self.sensor_rng)
        integrate_pointcloud(self.map, cloud)

    def _update_map(self) -> None:
        if np.isnan(self.map["elevation"]).all():
            return
        mapfilter.run_pipeline(self.map, self.filter_params)
        self.costs = planner.cost_grid(self.map, self.weights)

    def _drive(self, v: float, omega: float) -> None:
        p = self.ugv
        yaw = p.yaw + omega * self.dt
        x = p.x + v * math.cos(p.yaw) * self.dt
        y = p.y + v * math.sin(p.yaw) * self.dt
        if not self.world.in_bounds(x, y):
            x, y = p.x, p.y
        self.ugv = ugv_ground_pose(self.world, x, y, yaw, self.sc.ugv.footprint_radius)

    def _cell_value(self, layer: str, xy) -> float | None:
        if layer not in self.map or not self.map.contains_position(*xy):
            return None
        v = self.map[layer][self.map.position_to_index(*xy)]
        return None if np.isnan(v) else float(v)

    def _free_cell_near(self, xy) -> np.ndarray:
        """Center of the known cell nearest ``xy`` whose traversability reaches
        the floor; ``xy`` itself when there is none."""
        xy = np.asarray(xy, dtype=float)
        if not self.map.contains_position(*xy):
            return self.goal.copy()
        trav = self.map.layers.get(mapfilter.TRAVERSABILITY)
        if trav is None:
            return xy
        free = np.nonzero((trav >= self.sc.traversability_floor).ravel())[0]
        if free.size == 0:
            return xy
        X, Y = self.map.cell_centers()
        d = np.hypot(X.ravel()[free] - xy[0], Y.ravel()[free] - xy[1])
        k = free[np.lexsort((free, d))[0]]
        return np.array(self.map.index_to_position(divmod(int(k), self.map.dims[1])))

    # -- per-state behavior ---------------------------------------------------

    def _tandem(self, events: list, map_tick: bool) -> None:
        ugv_xy = np.array([self.ugv.x, self.ugv.y])
        to_goal = self.goal - ugv_xy
        dist_goal = float(np.hypot(*to_goal))
        if dist_goal <= self.sc.ugv.goal_tolerance:
            self._goto(S.DONE, events)
            return
        lead = self.goal if dist_goal <= self.sc.uav.standoff else ugv_xy + to_goal / dist_goal * self.sc.uav.standoff
        self._fly_toward(lead)

        if map_tick and self.costs is not None:
            local_goal = self._free_cell_near(self.uav[:2])
            res = detect.detect_cliff(self.map, ugv_xy, local_goal, self.weights, self.cliff_params, self.costs)
            events.append({"type": "replan", "goal": _f(res.best_goal), "cost": res.best_cost,
                           "cliff": res.cliff})
            if res.cliff:
                self.cliff = res
                self.ugv_path = None
                self._goto(S.CLIFF_CONFIRMED, events, best_goal=_f(res.best_goal), cost=res.best_cost)
                return
            self.ugv_path = res.path

        if self.ugv_path is not None and len(self.ugv_path) > 0:
            pose = (self.ugv.x, self.ugv.y, self.ugv.yaw)
            hit = planner.lookahead_target(self.ugv_path, pose, self.pursuit.lookahead)
            if hit is not None and abs(hit[1]) > math.pi / 2:
                # target behind: turn on the spot rather than sweep an arc
                self._drive(0.0, math.copysign(self.pursuit.max_angular_rate, hit[1]))
            else:
                v, omega, done = planner.pure_pursuit_step(self.ugv_path, pose, self.pursuit)
                if not done:
                    self._drive(v, omega)

    def _cross(self, events: list) -> None:
        if self.cross_start is None:
            self.cross_start = self.uav[:2].copy()
        self._fly_toward(self.goal)
        if float(np.hypot(*(self.uav[:2] - self.cross_start))) >= self.sc.anchor.cross_distance:
            self._goto(S.ANCHOR_SEARCH, events)

    def _anchor_search(self, events: list, map_tick: bool) -> None:
        a = self.sc.anchor
        self._fly_toward(self.goal)
        if map_tick:
            cand = detect.detect_anchor(self.map, self.uav[:2], a.region_radius, a.peakness_threshold,
                                        a.neighborhood_radius, min_height=a.min_height)
            if cand is not None:
                self.anchor = cand
                self._goto(S.WIND_TETHER, events, anchor=_f(cand.xy), peakness=cand.peakness)
                self._start_winding()
                return
        if self.time - self.state_entered > a.search_timeout:
            self._fail("no-anchor", events)

    def _start_winding(self) -> None:
        w = self.sc.winding
        ground = float(self.map["elevation"][self.anchor.cell]) - self.anchor.height
        plan = circle_trajectory(self.anchor.xy, 0.5 * self.map.resolution, w.flight_radius,
                                 ground + w.altitude, w.revolution_angle, w.step_deg, self.uav[:2])
        self.winding = {"plan": plan, "next": 0}

    def _wind(self, events: list) -> None:
        w = self.sc.winding
        plan = self.winding["plan"]
        k = self.winding["next"]
        if k < len(plan.waypoints) and self._fly_straight(plan.waypoints[k], w.speed):
            if k == 0:
                events.append({"type": "winding_started", "attempt": self.hook_attempts + 1})
            self.winding["next"] = k + 1
        if self.winding["next"] < len(plan.waypoints):
            return
        self.hook_attempts += 1
        caught = sample_hook_catch(self.hook_model, w.revolution_angle, self.hook_rng)
        events.append({"type": "hook", "attempt": self.hook_attempts, "success": caught,
                       "wraps": len(self.tether.wraps)})
        if caught:
            self.tether.anchored = True
            if self.tether.wraps:
                self.tether.end = self.tether.wraps[-1].copy()
            self._goto(S.LANDING_SEARCH, events)
        elif self.hook_attempts >= w.max_attempts:
            self._fail("hook-failed", events)
        else:
            # tether slipped off the pole; fly the circle again
            self.tether.wraps.clear()
            self.tether.wrapped_pole = None
            self._start_winding()

    def _landing(self, events: list, map_tick: bool) -> None:
        lp = self.sc.landing
        if self.landing_xy is None and (map_tick or self.time == self.state_entered):
            spot = detect.find_landing_pose(self.map, self.uav[:2], self.landing_params)
            if spot is not None:
                self.landing_xy = spot
                events.append({"type": "landing_target", "xy": _f(spot)})
        if self.landing_xy is None:
            if self.time - self.state_entered > lp.timeout:
                self._fail("no-landing", events)
            return
        lx, ly = self.landing_xy
        ground = sample_height(self.world, lx, ly)
        if float(np.hypot(self.uav[0] - lx, self.uav[1] - ly)) > 1e-9:
            self._fly_straight((lx, ly, self.uav[2]), self.sc.uav.speed)
            return
        self._fly_straight((lx, ly, ground), lp.descent_rate)
        if self.uav[2] - ground <= 1e-9:
            self.uav_airborne = False
            idx = self.map.position_to_index(lx, ly)
            events.append({"type": "motors_off", "xy": _f(self.landing_xy),
                           "conditions_ok": detect.landing_ok(self.map, idx, self.landing_params)})
            self._goto(S.LANDED, events)

    def _start_climb(self, events: list) -> None:
        self.free_length = self.tether.deployed - self.tether.wrapped_length()
        events.append({"type": "winch_on", "free_length": self.free_length})
        self._goto(S.WINCH_CLIMB, events)

    def _climb(self, events: list) -> None:
        anchor = self.tether.anchor
        before = self.free_length
        step = winch_climb_step(self.ugv.position, anchor, self.world, self.sc.tether.wind_rate, self.dt,
                                self.free_length, self.sc.ugv.footprint_radius)
        self.free_length = step.free_length
        self.tether.deployed -= before - step.free_length
        heading = math.atan2(anchor[1] - self.ugv.y, anchor[0] - self.ugv.x)
        self.ugv = ugv_ground_pose(self.world, step.position[0], step.position[1], heading,
                                   self.sc.ugv.footprint_radius)
        if step.stalled:
            events.append({"type": "stall"})
            self._fail("winch-stall", events)
        elif step.climbed:
            self._goto(S.DONE, events)

    # -- main loop ------------------------------------------------------------

    def step(self) -> list:
        assert self.state not in TERMINAL, "step() called on a finished mission"
        events: list = []
        if self.uav_airborne and self.tick % self.sensor_every == 0:
            self._sense()
        map_tick = self.tick % self.map_every == 0
        if map_tick:
            self._update_map()

        st = self.state
        if st is S.TANDEM:
            self._tandem(events, map_tick)
        elif st is S.CLIFF_CONFIRMED:
            self._goto(S.UAV_CROSS, events)
        elif st is S.UAV_CROSS:
            self._cross(events)
        elif st is S.ANCHOR_SEARCH:
            self._anchor_search(events, map_tick)
        elif st is S.WIND_TETHER:
            self._wind(events)
        elif st is S.LANDING_SEARCH:
            self._landing(events, map_tick)
        elif st is S.LANDED:
            self._start_climb(events)
        elif st is S.WINCH_CLIMB:
            self._climb(events)

        update_tether(self.tether, self.ugv.position, self.uav, self.world)
        if self.state not in TERMINAL and self.tick + 1 >= self.max_ticks:
            self._fail("max-ticks", events)
        self._record(events)
        self.tick += 1
        return events

    def _record(self, events: list) -> None:
        t = self.tether
        ugv_xy = (self.ugv.x, self.ugv.y)
        rec = {
            "tick": self.tick,
            "time": self.time,
            "state": self.state.value,
            "uav": _f(self.uav),
            "ugv": _f((self.ugv.x, self.ugv.y, self.ugv.z, self.ugv.yaw)),
            "ugv_traversability": self._cell_value(mapfilter.TRAVERSABILITY, ugv_xy),
            "ugv_cost": self._position_cost(ugv_xy),
            "uav_cost": self._position_cost(self.uav[:2]),
            "tether": {
                "deployed": t.deployed,
                "wound": t.wound,
                "polyline": t.polyline_length(),
                "wraps": len(t.wraps),
                "anchored": t.anchored,
            },
            "events": events,
        }
        if self.state in TERMINAL:
            rec["outcome"] = self.state.value
            rec["reason"] = self.reason
            self.log.outcome = self.state.value
            self.log.reason = self.reason
        self.log.records.append(rec)

    def _position_cost(self, xy) -> float | None:
        if self.costs is None or not self.map.contains_position(*xy):
            return None
        return float(self.costs[self.map.position_to_index(*xy)])

    def run(self) -> MissionLog:
        while self.state not in TERMINAL:
            self.step()
        return self.log

    def summary(self) -> dict:
        recs = self.log.records
        ugv = np.array([r["ugv"][:2] for r in recs])
        uav = np.array([r["uav"][:2] for r in recs])

        def travelled(a):
            return float(np.linalg.norm(np.diff(a, axis=0), axis=1).sum()) if len(a) > 1 else 0.0

        anchor = self.tether.anchor
        return {
            "scenario": self.sc.name,
            "seed": self.seed,
            "outcome": self.log.outcome,
            "reason": self.log.reason,
            "ticks": len(recs),
            "sim_time": self.time,
            "states": self.log.states(),
            "ugv_distance": travelled(ugv),
            "uav_distance": travelled(uav),
            "hook_attempts": self.hook_attempts,
            "anchor_detected": None if self.anchor is None else _f(self.anchor.xy),
            "tether_anchor": None if anchor is None else _f(anchor),
            "landing": None if self.landing_xy is None else _f(self.landing_xy),
            "ugv_final": _f(recs[-1]["ugv"][:3]) if recs else None,
        }


def run(scenario: Scenario, seed: int | None = None, max_ticks: int | None = None) -> MissionLog:
    return Simulation(scenario, seed, max_ticks).run()
