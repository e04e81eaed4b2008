"""Tethered UAV/UGV cooperation simulator and planning library."""

from .detect import (AnchorCandidate, CliffParams, LandingParams, detect_anchor, detect_cliff,
                     find_landing_pose, peakness)
from .gridmap import CellIndex, GridMap, integrate_pointcloud
from .mapfilter import FilterParams, run_pipeline
from .mission import MissionLog, MissionState, Simulation, run
from .planner import Path, PlanWeights, PursuitParams, astar_plan, cell_cost, pure_pursuit_step, uav_goto_step
from .scenario import Scenario, ScenarioError, load_scenario, save_scenario
from .tether import HookModel, TetherState, circle_trajectory, sample_hook_catch, update_tether, winch_climb_step
from .world import (Box, InvalidPositionError, Pole, Pose, SensorSpec, WorldModel, render_depth_pointcloud,
                    sample_height, ugv_ground_pose)

__version__ = "0.1.0"
