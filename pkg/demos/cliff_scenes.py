"""Cliff detection on three synthetic 10 m x 10 m fields.

A full-width step, the same step with a 1 m ramp cut through it, and a flat
field whose goal sits on a box. Only the first one should be a cliff.
"""

import numpy as np

from tcsim.detect import CliffParams, detect_cliff
from tcsim.gridmap import ground_truth_map
from tcsim.mapfilter import FilterParams, run_pipeline
from tcsim.planner import PlanWeights
from tcsim.world import Box, WorldModel

RES = 0.05
X, Y = np.meshgrid(np.arange(201) * RES, np.arange(201) * RES)

step = np.where(X >= 5.0, 1.0, 0.0)
ramp = np.clip((X - 3.5) / 3.0, 0.0, 1.0)
gap = np.where((Y >= 4.5) & (Y <= 5.5), ramp, step)
worlds = {
    "step": WorldModel(step, RES),
    "ramp gap": WorldModel(gap, RES),
    "goal on box": WorldModel(np.zeros_like(X), RES, obstacles=[Box((8.0, 5.0, 0.15), (0.6, 0.6, 0.3))]),
}

start, goal = (2.0, 5.0), (8.0, 5.0)
for name, world in worlds.items():
    gmap = run_pipeline(ground_truth_map(world, RES), FilterParams())
    r = detect_cliff(gmap, start, goal, PlanWeights(), CliffParams())
    bx, by = r.best_goal
    print(f"{name:12s} cliff={r.cliff!s:5s} cost={r.best_cost:8.1f} best_goal=({bx:.2f}, {by:.2f})")
