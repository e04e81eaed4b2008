"""Command line entry point: ``tcsim run|filter|plan|detect-anchor|detect-cliff``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import detect, mapfilter, planner
from .export import load_map, map_svg, save_map, write_csv, write_jsonl
from .gridmap import GridMap, ground_truth_map
from .mission import Simulation
from .scenario import Scenario, ScenarioError, load_scenario

log = logging.getLogger("tcsim")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def run_mission(sc: Scenario, out_dir, seed: int | None = None, max_ticks: int | None = None,
                export_svg: bool = False) -> int:
    """Run one mission and write its artifacts. Returns 0 iff the outcome is Done."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = Simulation(sc, seed=seed, max_ticks=max_ticks)
    mlog = sim.run()
    write_jsonl(out / "mission_log.jsonl", mlog.records)
    _write_json(out / "summary.json", sim.summary())
    for robot in ("ugv", "uav"):
        rows = [(r["tick"], r[robot][0], r[robot][1], r[f"{robot}_cost"]) for r in mlog.records]
        write_csv(out / f"{robot}_trajectory.csv", ["tick", "x", "y", "cost"],
                  [(t, x, y, "" if c is None else c) for t, x, y, c in rows])
    save_map(sim.map, out / "maps")
    if export_svg:
        traj = {
            "ugv": ("#1f4fff", [tuple(r["ugv"][:2]) for r in mlog.records]),
            "uav": ("#ff00ff", [tuple(r["uav"][:2]) for r in mlog.records]),
        }
        anchor = None if sim.anchor is None else sim.anchor.xy
        (out / "top_view.svg").write_text(map_svg(sim.map, traj, anchor, sim.landing_xy))
    log.info("outcome %s (%s) after %d ticks", mlog.outcome, mlog.reason, len(mlog.records))
    return 0 if mlog.outcome == "Done" else 1


def _input_map(args, sc: Scenario) -> GridMap:
    if args.map:
        return load_map(args.map)
    return ground_truth_map(sc.build_world(), sc.map.resolution)


def _filtered(gmap: GridMap, sc: Scenario) -> GridMap:
    if mapfilter.TRAVERSABILITY not in gmap:
        mapfilter.run_pipeline(gmap, sc.filter_params())
    return gmap


def _path_json(path) -> dict | None:
    if path is None:
        return None
    return {"cost": path.cost, "cells": [list(map(int, c)) for c in path.cells],
            "waypoints": np.asarray(path.waypoints).tolist()}


def _xy(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return x, y


def _cmd_run(args, sc: Scenario) -> int:
    return run_mission(sc, args.out, args.seed, args.max_ticks, args.export_svg)


def _cmd_filter(args, sc: Scenario) -> int:
    gmap = _input_map(args, sc)
    mapfilter.run_pipeline(gmap, sc.filter_params())
    save_map(gmap, Path(args.out) / "maps")
    return 0


def _cmd_plan(args, sc: Scenario) -> int:
    gmap = _filtered(_input_map(args, sc), sc)
    start = args.start or tuple(sc.ugv.start)
    goal = args.goal or tuple(sc.goal)
    path = planner.astar_plan(gmap, start, goal, sc.plan_weights())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "plan.json", {"start": list(start), "goal": list(goal), "path": _path_json(path)})
    if path is not None:
        write_csv(out / "plan.csv", ["x", "y"], [tuple(map(float, p)) for p in path.waypoints])
    return 0 if path is not None else 1


def _cmd_detect_cliff(args, sc: Scenario) -> int:
    gmap = _filtered(_input_map(args, sc), sc)
    start = args.start or tuple(sc.ugv.start)
    goal = args.goal or tuple(sc.goal)
    res = detect.detect_cliff(gmap, start, goal, sc.plan_weights(), sc.cliff_params())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "cliff.json", {"cliff": res.cliff, "best_goal": list(res.best_goal),
                                     "best_cost": None if np.isinf(res.best_cost) else res.best_cost,
                                     "path": _path_json(res.path)})
    if not args.quiet:
        print(f"cliff={res.cliff} best_goal={res.best_goal} cost={res.best_cost:.6g}")
    return 0


def _cmd_detect_anchor(args, sc: Scenario) -> int:
    gmap = _filtered(_input_map(args, sc), sc)
    a = sc.anchor
    if args.center is None:
        # whole map
        x0, x1, y0, y1 = sc.build_world().bounds
        center = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
        radius = float(np.hypot(x1 - x0, y1 - y0))
    else:
        center = args.center
        radius = args.radius if args.radius is not None else a.region_radius
    cand = detect.detect_anchor(gmap, center, radius, a.peakness_threshold, a.neighborhood_radius,
                                layer=mapfilter.RAW, min_height=a.min_height)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = None
    if cand is not None:
        result = {"xy": list(cand.xy), "cell": list(map(int, cand.cell)), "peakness": cand.peakness,
                  "sigma_l2": cand.sigma_l2, "sigma_s2": cand.sigma_s2, "height": cand.height}
    _write_json(out / "anchor.json", {"center": list(center), "radius": radius, "anchor": result})
    if not args.quiet:
        print("no anchor found" if cand is None else f"anchor at {cand.xy} peakness={cand.peakness:.6g}")
    return 0 if cand is not None else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario JSON file")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--max-ticks", type=int, default=None, help="override the tick limit")
    common.add_argument("--export-svg", action="store_true", help="also write an SVG top view")
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")

    on_map = argparse.ArgumentParser(add_help=False)
    on_map.add_argument("--map", default=None,
                        help="saved map directory (default: ground-truth map of the scenario world)")

    parser = argparse.ArgumentParser(prog="tcsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run a full mission")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("filter", parents=[common, on_map], help="run the map filter pipeline")
    p.set_defaults(func=_cmd_filter)
    for name, func, help_ in (("plan", _cmd_plan, "plan one A* path"),
                              ("detect-cliff", _cmd_detect_cliff, "run the cliff detector")):
        p = sub.add_parser(name, parents=[common, on_map], help=help_)
        p.add_argument("--start", type=_xy, default=None, help="x,y (default: UGV start)")
        p.add_argument("--goal", type=_xy, default=None, help="x,y (default: scenario goal)")
        p.set_defaults(func=func)
    p = sub.add_parser("detect-anchor", parents=[common, on_map], help="search for an anchor point")
    p.add_argument("--center", type=_xy, default=None, help="x,y search center (default: search the whole map)")
    p.add_argument("--radius", type=float, default=None, help="search radius in m")
    p.set_defaults(func=_cmd_detect_anchor)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = "WARNING" if args.quiet else os.environ.get("TCS_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = load_scenario(args.scenario)
    except (OSError, ScenarioError) as err:
        print(f"tcsim: scenario error: {err}", file=sys.stderr)
        return 2
    return args.func(args, sc)


if __name__ == "__main__":
    sys.exit(main())
