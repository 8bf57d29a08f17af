"""Greenhouse mobile-robot control benchmark.

Layers, from the ground up:

* :mod:`greenbench.world`: terrain sectors, slope field, obstacles, occupancy grid
* :mod:`greenbench.physics`: per-side wheel/friction dynamics and kinematics
* :mod:`greenbench.low_level`: PID motor controller with anti-windup and slope feedforward
* :mod:`greenbench.mid_level`: elastic-band MPC tracker and range sensing
* :mod:`greenbench.planner`: Lazy Theta* global planner with traversal cost
* :mod:`greenbench.metrics`: SAE / SCI indices and composite costs
* :mod:`greenbench.scenarios`, :mod:`greenbench.export`, :mod:`greenbench.cli`: the benchmark harness
"""

from .errors import (
    ConfigError,
    ExportError,
    GreenbenchError,
    InvariantError,
    NoPathError,
    OutOfBoundsError,
    PhysicsDivergence,
    TrialFailed,
)
from .export import export_csv
from .low_level import FeedforwardConfig, PidController, PidGains, closed_loop_poles, identify_static_gain
from .metrics import MetricReport, TrialLog, evaluate
from .mid_level import ElasticBand, MidLevelConfig, TebTracker, band_cost, mpc_step, optimize_band
from .physics import RobotParams, RobotState, motor_first_order, step_robot, step_wheel
from .planner import Path, PlannerConfig, Replanner, lazy_theta_star, plan_path
from .plugins import PluginSet, register
from .scenarios import (
    AggregateTable,
    BenchParams,
    ScenarioConfig,
    run_category1,
    run_category2,
    run_category3,
    run_matrix,
    run_trial,
)
from .world import OccupancyGrid, World, default_world, load_world, rasterize

__all__ = [
    "AggregateTable",
    "BenchParams",
    "ConfigError",
    "ElasticBand",
    "ExportError",
    "FeedforwardConfig",
    "GreenbenchError",
    "InvariantError",
    "MetricReport",
    "MidLevelConfig",
    "NoPathError",
    "OccupancyGrid",
    "OutOfBoundsError",
    "Path",
    "PhysicsDivergence",
    "PidController",
    "PidGains",
    "PlannerConfig",
    "PluginSet",
    "Replanner",
    "RobotParams",
    "RobotState",
    "ScenarioConfig",
    "TebTracker",
    "TrialFailed",
    "TrialLog",
    "World",
    "band_cost",
    "closed_loop_poles",
    "default_world",
    "evaluate",
    "export_csv",
    "identify_static_gain",
    "lazy_theta_star",
    "load_world",
    "motor_first_order",
    "mpc_step",
    "optimize_band",
    "plan_path",
    "rasterize",
    "register",
    "run_category1",
    "run_category2",
    "run_category3",
    "run_matrix",
    "run_trial",
    "step_robot",
    "step_wheel",
]
