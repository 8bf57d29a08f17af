"""Benchmark harness: scenario settings, parameter files and the trial loop.

One trial runs three nested clocks on a fixed grid of time steps:

* physics every 5 ms (``step_robot``),
* low-level control and logging every 10 ms,
* mid-level tracking every 100 ms (categories 2 and 3),
* global replanning every ``replan_period`` seconds (category 3).

At each control tick the encoders are read, the wheel references updated,
both motor controllers stepped, one log row written and then the plant
advanced by two physics steps with the new torques held.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import config as cfg
from .errors import (
    ConfigError,
    InvariantError,
    NoPathError,
    OutOfBoundsError,
    PhysicsDivergence,
    TrialFailed,
)
from .low_level import FeedforwardConfig, PidController, PidGains, feedforward_gain
from .metrics import MetricReport, TrialLog, closest_point_on_polyline, columns_for, evaluate
from .mid_level import MidLevelConfig, TebTracker, lidar_ranges
from .physics import (
    EncoderModel,
    RobotParams,
    RobotState,
    inverse_kinematics,
    measure_encoders,
    motor_first_order,
    step_robot,
)
from .planner import PlannerConfig, Replanner
from .plugins import PluginSet
from .rng import trial_streams
from .world import (
    OccupancyGrid,
    TerrainSample,
    World,
    default_world,
    load_world,
    obstacle_clearance,
    rasterize,
    sector_at,
)

PHYSICS_DT = 0.005
CONTROL_DT = 0.01
TRACKING_DT = 0.1
LOG_DT = CONTROL_DT

_SUBSTEPS = int(round(CONTROL_DT / PHYSICS_DT))
_TRACK_EVERY = int(round(TRACKING_DT / CONTROL_DT))

# (slope, terrain change) rows in result-table order
CONDITIONS = ((False, False), (True, False), (False, True), (True, True))
PAYLOADS = (0.0, 70.0)


# -- parameters ------------------------------------------------------------------


@dataclass(frozen=True)
class Category1Profile:
    """Open-loop wheel reference for the low-level test.

    Both wheels ramp from 0 to ``speed`` over ``ramp_time`` starting at
    ``step_time`` and hold until ``hold_until``. The robot then turns on the
    spot (right wheel ``-speed``, left ``+speed``) for ``turn_time``, drives
    forward at ``speed`` for ``forward_time`` and stops. ``turn_time=None``
    picks the duration of a half turn.
    """

    step_time: float = 4.0
    ramp_time: float = 1.0
    speed: float = 0.75
    hold_until: float = 34.0
    turn_time: float | None = None
    forward_time: float = 8.0
    duration: float = 60.0

    def __post_init__(self):
        if not self.duration > 0:
            raise InvariantError("simulation duration must be > 0")
        if self.ramp_time < 0 or self.forward_time < 0 or self.step_time < 0:
            raise InvariantError("profile times must be >= 0")
        if self.hold_until < self.step_time + self.ramp_time:
            raise InvariantError("hold_until must come after the ramp")
        if self.turn_time is not None and self.turn_time < 0:
            raise InvariantError("turn_time must be >= 0")

    def turn_duration(self, params: RobotParams) -> float:
        if self.turn_time is not None:
            return self.turn_time
        if self.speed == 0:
            return 0.0
        # body rate with wheels at +-speed is 2 r speed / L_w
        return math.pi * params.L_w / (2.0 * params.r * abs(self.speed))

    def reference(self, t: float, params: RobotParams) -> tuple[float, float]:
        """Wheel references (right, left) at time ``t``."""
        s = self.speed
        if t < self.step_time:
            return 0.0, 0.0
        if t < self.step_time + self.ramp_time:
            w = s * (t - self.step_time) / self.ramp_time
            return w, w
        if t < self.hold_until:
            return s, s
        turn_end = self.hold_until + self.turn_duration(params)
        if t < turn_end:
            return -s, s
        if t < turn_end + self.forward_time:
            return s, s
        return 0.0, 0.0


@dataclass(frozen=True)
class LowLevelParams:
    robot: RobotParams = field(default_factory=RobotParams)
    gains: PidGains = field(default_factory=PidGains)
    feedforward: FeedforwardConfig = field(default_factory=FeedforwardConfig)
    encoder_sigma: float = 0.02
    start: tuple[float, float, float] = (10.1, 3.0, 0.78)
    profile: Category1Profile = field(default_factory=Category1Profile)


@dataclass(frozen=True)
class TrackingParams:
    config: MidLevelConfig = field(default_factory=MidLevelConfig)
    start: tuple[float, float, float] = (10.1, 3.0, 0.78)
    waypoints: tuple[tuple[float, float], ...] = ((10.2, 13.7), (15.0, 13.7), (18.0, 17.4))
    timeout: float = 160.0


@dataclass(frozen=True)
class GlobalParams:
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    resolution: float = 0.1
    replan_period: float = 2.0
    # plan vertices this close to the robot count as already passed
    pass_radius: float = 1.0
    timeout: float = 160.0
    start: tuple[float, float, float] = (10.1, 3.0, 0.78)
    goal: tuple[float, float] = (18.0, 17.4)


@dataclass(frozen=True)
class BenchParams:
    low: LowLevelParams = field(default_factory=LowLevelParams)
    tracking: TrackingParams = field(default_factory=TrackingParams)
    planning: GlobalParams = field(default_factory=GlobalParams)

    @classmethod
    def load(cls, c1: str | Path | None = None, c2: str | Path | None = None, c3: str | Path | None = None) -> BenchParams:
        """Read whichever parameter files are given; the rest keep their defaults."""
        return cls(
            low=load_low_level_params(cfg.read_file(c1)) if c1 else LowLevelParams(),
            tracking=load_tracking_params(cfg.read_file(c2)) if c2 else TrackingParams(),
            planning=load_global_params(cfg.read_file(c3)) if c3 else GlobalParams(),
        )


def _check_keys(data: dict, allowed, where: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", field=where or None)
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", field=prefix + unknown[0])


def _pose(value, field_name: str) -> tuple[float, float, float]:
    x, y, theta = cfg.get_floats(value, field_name, 3)
    return x, y, theta


def load_low_level_params(data: dict) -> LowLevelParams:
    """Build low-level settings from a parsed ``c1`` file; missing keys keep defaults."""
    _check_keys(data, ("robot", "pid", "feedforward", "encoder", "test"), "")
    d = LowLevelParams()

    raw = data.get("robot", {})
    robot_keys = ("r", "L_w", "m_robot", "m_w", "m_v", "nW", "J", "b", "k_tau", "I_yy", "tau_max", "v_max", "omega_max")
    _check_keys(raw, robot_keys, "robot")
    kw = {}
    for key in robot_keys:
        if key in raw:
            kw[key] = cfg.get_int(raw, key, field="robot") if key == "nW" else cfg.get_float(raw, key, field="robot")
    try:
        robot = replace(d.robot, **kw) if "m_v" in kw else replace(d.robot, m_v=None, **kw)
    except InvariantError as exc:
        raise ConfigError(str(exc), field="robot") from exc

    raw = data.get("pid", {})
    _check_keys(raw, ("kp", "ki", "kd", "n_filter", "antiwindup", "kaw", "tau_f", "n_f"), "pid")
    g = d.gains
    try:
        gains = PidGains(
            kp=cfg.get_float(raw, "kp", g.kp, field="pid"),
            ki=cfg.get_float(raw, "ki", g.ki, field="pid"),
            kd=cfg.get_float(raw, "kd", g.kd, field="pid"),
            n_filter=cfg.get_float(raw, "n_filter", g.n_filter, field="pid"),
            kaw=cfg.get_float(raw, "kaw", g.kaw, field="pid"),
            antiwindup=cfg.get_bool(raw, "antiwindup", g.antiwindup, field="pid"),
            tau_f=cfg.get_float(raw, "tau_f", g.tau_f, field="pid"),
            n_f=cfg.get_int(raw, "n_f", g.n_f, field="pid"),
        )
    except InvariantError as exc:
        raise ConfigError(str(exc), field="pid") from exc

    raw = data.get("feedforward", {})
    _check_keys(raw, ("enabled", "k_ff", "k_s", "payload"), "feedforward")
    enabled = cfg.get_bool(raw, "enabled", False, field="feedforward")
    payload = cfg.get_float(raw, "payload", 0.0, field="feedforward")
    if "k_s" in raw:
        k_s = cfg.get_float(raw, "k_s", field="feedforward")
        k_m, _ = motor_first_order(robot)
        ff = FeedforwardConfig(feedforward_gain(k_s, k_m), k_s, enabled, payload)
    else:
        ff = FeedforwardConfig(cfg.get_float(raw, "k_ff", 0.0, field="feedforward"), None, enabled, payload)

    raw = data.get("encoder", {})
    _check_keys(raw, ("sigma",), "encoder")
    sigma = cfg.get_float(raw, "sigma", d.encoder_sigma, field="encoder")
    if sigma < 0:
        raise ConfigError("must be >= 0", field="encoder.sigma")

    raw = data.get("test", {})
    fields = ("step_time", "ramp_time", "speed", "hold_until", "turn_time", "forward_time", "duration")
    _check_keys(raw, fields + ("start",), "test")
    p = d.profile
    try:
        profile = Category1Profile(**{k: cfg.get_float(raw, k, getattr(p, k), field="test") for k in fields})
    except InvariantError as exc:
        raise ConfigError(str(exc), field="test") from exc
    start = _pose(raw["start"], "test.start") if "start" in raw else d.start
    return LowLevelParams(robot, gains, ff, sigma, start, profile)


def load_tracking_params(data: dict) -> TrackingParams:
    """Build mid-level settings from a parsed ``c2`` file; missing keys keep defaults."""
    d = TrackingParams()
    scalar = (
        "lambda_t", "d_safe", "r_robot", "v_max", "omega_max", "max_node_spacing",
        "success_tolerance", "dt_min", "dt_max", "penalty_scale", "clearance_margin", "lidar_range",
    )
    integer = ("iteration_budget", "max_nodes")
    _check_keys(data, scalar + integer + ("q_diag", "r_diag", "timeout", "start", "waypoints"), "")
    kw = {k: cfg.get_float(data, k) for k in scalar if k in data}
    kw.update({k: cfg.get_int(data, k) for k in integer if k in data})
    if "q_diag" in data:
        kw["q_diag"] = tuple(cfg.get_floats(data["q_diag"], "q_diag", 3))
    if "r_diag" in data:
        kw["r_diag"] = tuple(cfg.get_floats(data["r_diag"], "r_diag", 2))
    try:
        config = replace(d.config, **kw)
    except InvariantError as exc:
        raise ConfigError(str(exc)) from exc
    timeout = cfg.get_float(data, "timeout", d.timeout)
    if not timeout > 0:
        raise ConfigError("must be > 0", field="timeout")
    start = _pose(data["start"], "start") if "start" in data else d.start
    if "waypoints" in data:
        waypoints = tuple(cfg.get_points(data["waypoints"], "waypoints", 0))
    else:
        waypoints = d.waypoints
    return TrackingParams(config, start, waypoints, timeout)


def load_global_params(data: dict) -> GlobalParams:
    """Build planner settings from a parsed ``c3`` file; missing keys keep defaults."""
    d = GlobalParams()
    _check_keys(
        data,
        ("how_many_corners", "w_euc_cost", "w_traversal_cost", "n_max", "traversal_mode", "snap_radius",
         "resolution", "replan_period", "pass_radius", "timeout", "start", "goal"),
        "",
    )
    p = d.planner
    try:
        planner = PlannerConfig(
            how_many_corners=cfg.get_int(data, "how_many_corners", p.how_many_corners),
            w_euc=cfg.get_float(data, "w_euc_cost", p.w_euc),
            w_traversal=cfg.get_float(data, "w_traversal_cost", p.w_traversal),
            n_max=cfg.get_int(data, "n_max", p.n_max),
            traversal_mode=str(data.get("traversal_mode", p.traversal_mode)),
            snap_radius=cfg.get_float(data, "snap_radius", p.snap_radius),
        )
    except InvariantError as exc:
        raise ConfigError(str(exc)) from exc
    values = {k: cfg.get_float(data, k, getattr(d, k)) for k in ("resolution", "replan_period", "timeout")}
    for k, v in values.items():
        if not v > 0:
            raise ConfigError("must be > 0", field=k)
    pass_radius = cfg.get_float(data, "pass_radius", d.pass_radius)
    if pass_radius < 0:
        raise ConfigError("must be >= 0", field="pass_radius")
    start = _pose(data["start"], "start") if "start" in data else d.start
    goal = cfg.get_point(data["goal"], "goal") if "goal" in data else d.goal
    return GlobalParams(planner, values["resolution"], values["replan_period"], pass_radius, values["timeout"], start, goal)


# -- scenario ----------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    """One benchmark invocation. Defaults give category 1, no disturbances, one trial."""

    category: int = 1
    payload: float = 0.0
    terrain_slope: bool = False
    change_terrain: bool = False
    trials: int = 1
    seed: int = 0
    out_dir: str | Path | None = None
    c1_params: str | Path | None = None
    c2_params: str | Path | None = None
    c3_params: str | Path | None = None
    world_file: str | Path | None = None
    noise: bool = True
    # every trial reuses trial index 0's noise streams
    same_seed: bool = False

    def __post_init__(self):
        if self.category not in (1, 2, 3):
            raise InvariantError(f"category must be 1, 2 or 3, got {self.category}")
        if not 0.0 <= self.payload <= 70.0:
            raise InvariantError(f"payload must lie in [0, 70] kg, got {self.payload:g}")
        if not (isinstance(self.trials, int) and self.trials >= 1):
            raise InvariantError("trials must be an integer >= 1")

    def params(self) -> BenchParams:
        return BenchParams.load(self.c1_params, self.c2_params, self.c3_params)

    def world(self) -> World:
        if self.world_file is None:
            base = default_world()
        else:
            path = Path(self.world_file)
            try:
                text = path.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read file: {exc}", source=str(path)) from exc
            base = load_world(text, source=str(path))
        return base.with_scenario(
            payload=self.payload, terrain_change=self.change_terrain, slope=self.terrain_slope
        )


@dataclass(frozen=True)
class TrialResult:
    trial: int
    log: TrialLog | None
    report: MetricReport | None
    failed: bool = False
    cause: str = ""


# -- trial loop ----------------------------------------------------------------------


def terrain_under(world: World, state: RobotState) -> TerrainSample:
    """Terrain sample under the robot with the grade projected onto its heading."""
    ground = sector_at(world, (state.x, state.y))
    pitch = world.slope.pitch_deg(state.x, state.y, state.theta)
    return TerrainSample(ground.s, ground.mu, ground.crr, ground.cd, pitch)


def plan_waypoints(nodes: np.ndarray, goal, position, pass_radius: float) -> list[tuple[float, float]]:
    """Tracker waypoints from a plan: vertices after the start, ending exactly at ``goal``.

    Leading vertices within ``pass_radius`` of ``position`` are dropped; the
    goal itself is always kept.
    """
    pts = [tuple(map(float, p)) for p in np.asarray(nodes, dtype=float).reshape(-1, 2)[1:]]
    if pts:
        pts[-1] = (float(goal[0]), float(goal[1]))
    else:
        pts = [(float(goal[0]), float(goal[1]))]
    x, y = float(position[0]), float(position[1])
    while len(pts) > 1 and math.hypot(pts[0][0] - x, pts[0][1] - y) <= pass_radius:
        pts.pop(0)
    return pts


def _default_plugins(plugins: PluginSet | None, params: BenchParams, robot: RobotParams, grid) -> PluginSet:
    plugins = plugins or PluginSet()
    low = params.low
    tracking = params.tracking.config
    planning = params.planning
    return PluginSet(
        low_level=plugins.low_level or (lambda: PidController(low.gains, low.feedforward, robot)),
        mid_level=plugins.mid_level or (lambda: TebTracker(tracking, TRACKING_DT)),
        global_planner=plugins.global_planner
        or (lambda: Replanner(grid, planning.planner, planning.replan_period)),
    )


def simulate(
    category: int,
    world: World,
    params: BenchParams,
    plugins: PluginSet | None = None,
    seed: int = 0,
    trial: int = 0,
    noise: bool = True,
    grid: OccupancyGrid | None = None,
) -> TrialLog:
    """Run one trial and return its log.

    Raises:
        TrialFailed: on physics divergence, leaving the world, obstacle
            contact, a failed plan or a timeout. The partial log is attached.
    """
    if category not in (1, 2, 3):
        raise InvariantError(f"category must be 1, 2 or 3, got {category}")
    robot = params.low.robot.with_payload(world.payload_mass)
    if category == 3 and grid is None:
        grid = rasterize(world, params.planning.resolution)
    plugins = _default_plugins(plugins, params, robot, grid)
    streams = trial_streams(seed, trial)
    encoder = EncoderModel(
        params.low.encoder_sigma, noise, streams["encoder_r"], streams["encoder_l"]
    )
    mid = params.tracking.config

    if category == 1:
        start = params.low.start
        n_ticks = int(round(params.low.profile.duration / CONTROL_DT))
        if n_ticks < 1:
            raise InvariantError("simulation duration must be > 0")
    else:
        start = params.tracking.start if category == 2 else params.planning.start
        timeout = params.tracking.timeout if category == 2 else params.planning.timeout
        n_ticks = int(round(timeout / CONTROL_DT))

    columns = columns_for(category)
    rows: dict[str, list[float]] = {c: [] for c in columns}
    limits = {"omega_max": robot.omega_max, "tau_max": robot.tau_max, "v_max": mid.v_max}
    if category >= 2:
        limits["omega_max"] = mid.omega_max

    def make_log() -> TrialLog:
        return TrialLog(category, LOG_DT, rows, limits, polyline)

    state = RobotState(*start)
    ctl_r, ctl_l = plugins.low_level(), plugins.low_level()
    tracker = plugins.mid_level() if category >= 2 else None
    planner = plugins.global_planner() if category == 3 else None
    waypoints = list(params.tracking.waypoints) if category == 2 else []
    polyline = None
    goal = params.planning.goal
    ref = (0.0, 0.0)
    v_cmd = w_cmd = 0.0
    band, t_solve, wp_index = None, 0.0, 0
    last_plan = -math.inf
    done = False

    try:
        for k in range(n_ticks):
            t = k * CONTROL_DT
            if category == 1:
                ref = params.low.profile.reference(t, robot)
            elif k % _TRACK_EVERY == 0:
                if category == 3 and t - last_plan >= params.planning.replan_period - 1e-9:
                    path = planner.plan(grid, (state.x, state.y), goal)
                    polyline = np.asarray(path.nodes, dtype=float).reshape(-1, 2).copy()
                    polyline[-1] = goal
                    waypoints = plan_waypoints(path.nodes, goal, (state.x, state.y), params.planning.pass_radius)
                    last_plan = t
                observations = lidar_ranges(
                    state.pose, world.obstacles, noise, streams["lidar"], mid.lidar_range
                )
                result = tracker.step(state.pose, waypoints, observations)
                done = bool(result.done)
                v_cmd, w_cmd = (0.0, 0.0) if done else (float(result.v), float(result.omega))
                band, t_solve, wp_index = result.band, t, result.waypoint_index
                ref = inverse_kinematics(v_cmd, w_cmd, robot)

            meas_r, meas_l = measure_encoders(state, encoder)
            terrain = terrain_under(world, state)
            tau_r = float(ctl_r.step(ref[0], meas_r, terrain, CONTROL_DT))
            tau_l = float(ctl_l.step(ref[1], meas_l, terrain, CONTROL_DT))

            row = rows
            row["t"].append(t)
            row["omega_ref_r"].append(ref[0])
            row["omega_ref_l"].append(ref[1])
            row["omega_meas_r"].append(meas_r)
            row["omega_meas_l"].append(meas_l)
            row["omega_r"].append(state.right.omega)
            row["omega_l"].append(state.left.omega)
            row["tau_r"].append(tau_r)
            row["tau_l"].append(tau_l)
            row["x"].append(state.x)
            row["y"].append(state.y)
            row["theta"].append(state.theta)
            row["s"].append(terrain.s)
            row["phi"].append(terrain.phi_deg)
            if category >= 2:
                if band is not None and not done:
                    px, py, _ = band.pose_at(t - t_solve)
                else:
                    px, py = state.x, state.y
                row["v_cmd"].append(v_cmd)
                row["omega_cmd"].append(w_cmd)
                row["x_teb"].append(px)
                row["y_teb"].append(py)
                row["waypoint"].append(wp_index)
            if category == 3:
                nearest, _ = closest_point_on_polyline(polyline, [(state.x, state.y)])
                nx, ny = nearest[0]
                row["plan_x"].append(nx)
                row["plan_y"].append(ny)
            if done:
                return make_log()

            for _ in range(_SUBSTEPS):
                state = step_robot(state, tau_r, tau_l, world, robot, PHYSICS_DT, ref)
            if category >= 2:
                clearance, ob_id = obstacle_clearance(world, (state.x, state.y))
                if clearance - mid.r_robot < 0.0:
                    raise TrialFailed(
                        f"contact with obstacle {ob_id} at t={t + CONTROL_DT:.2f} s", make_log()
                    )
    except TrialFailed:
        raise
    except (PhysicsDivergence, OutOfBoundsError, NoPathError) as exc:
        raise TrialFailed(f"{type(exc).__name__}: {exc}", make_log()) from exc

    if category >= 2:
        raise TrialFailed(f"timeout after {n_ticks * CONTROL_DT:g} s", make_log())
    return make_log()


def _trial_index(config: ScenarioConfig, trial: int) -> int:
    return 0 if config.same_seed else trial


def run_trial(
    config: ScenarioConfig,
    trial: int = 0,
    plugins: PluginSet | None = None,
    *,
    params: BenchParams | None = None,
    world: World | None = None,
    grid: OccupancyGrid | None = None,
) -> TrialResult:
    """One trial of ``config.category``; failures are captured, not raised."""
    params = params or config.params()
    world = world or config.world()
    try:
        log = simulate(
            config.category, world, params, plugins, config.seed, _trial_index(config, trial), config.noise, grid
        )
    except TrialFailed as exc:
        return TrialResult(trial, exc.log, None, True, exc.cause)
    report = evaluate(log) if len(log) >= 2 else None
    return TrialResult(trial, log, report)


def _run_category(category: int, config: ScenarioConfig, plugins, params, world, trial) -> TrialLog:
    params = params or config.params()
    world = world or config.world()
    return simulate(
        category, world, params, plugins, config.seed, _trial_index(config, trial), config.noise
    )


def run_category1(config: ScenarioConfig, plugins: PluginSet | None = None, *, params=None, world=None, trial=0) -> TrialLog:
    """Low-level test: open-loop wheel-speed profile from the start pose."""
    return _run_category(1, config, plugins, params, world, trial)


def run_category2(config: ScenarioConfig, plugins: PluginSet | None = None, *, params=None, world=None, trial=0) -> TrialLog:
    """Mid-level test: visit the configured waypoints in order."""
    return _run_category(2, config, plugins, params, world, trial)


def run_category3(config: ScenarioConfig, plugins: PluginSet | None = None, *, params=None, world=None, trial=0) -> TrialLog:
    """Full stack: replan toward the goal and track the plan's vertices."""
    return _run_category(3, config, plugins, params, world, trial)


# -- aggregation ---------------------------------------------------------------------


@dataclass(frozen=True)
class AggregateRow:
    slope: bool
    terrain_change: bool
    payload: float
    mean: dict[str, float]
    std: dict[str, float]
    n_trials: int
    failures: tuple[str, ...] = ()


@dataclass(frozen=True)
class AggregateTable:
    """Mean and sample standard deviation of every index per scenario row.

    ``std`` is 0 for a row with a single successful trial.
    """

    category: int
    rows: tuple[AggregateRow, ...]

    def row(self, slope: bool, terrain_change: bool, payload: float) -> AggregateRow:
        for r in self.rows:
            if r.slope == slope and r.terrain_change == terrain_change and r.payload == payload:
                return r
        raise KeyError((slope, terrain_change, payload))

    @property
    def any_failed(self) -> bool:
        return any(r.failures for r in self.rows)

    def to_text(self) -> str:
        names = []
        for r in self.rows:
            for n in r.mean:
                if n not in names:
                    names.append(n)
        head = ["slope", "terrain", "payload", "ok"] + [f"{n} (mean +- std)" for n in names]
        lines = [" | ".join(head)]
        for r in self.rows:
            cells = ["ON" if r.slope else "OFF", "ON" if r.terrain_change else "OFF", f"{r.payload:g}", str(r.n_trials)]
            for n in names:
                if n in r.mean:
                    cells.append(f"{r.mean[n]:.4f} +- {r.std[n]:.4f}")
                else:
                    cells.append("-")
            lines.append(" | ".join(cells))
            for cause in r.failures:
                lines.append(f"  FAILED: {cause}")
        return "\n".join(lines) + "\n"


def aggregate(config: ScenarioConfig, results: list[TrialResult]) -> AggregateRow:
    """Combine the trials of one scenario; failed trials are listed, not averaged."""
    ok = [r.report for r in results if not r.failed and r.report is not None]
    failures = tuple(f"trial {r.trial}: {r.cause}" for r in results if r.failed)
    mean, std = {}, {}
    if ok:
        names = [n for n, _ in ok[0].as_rows() if n != "N"]
        for n in names:
            # exact summation: identical trials give a std of exactly 0
            values = [dict(rep.as_rows())[n] for rep in ok]
            mean[n] = statistics.fmean(values)
            std[n] = statistics.stdev(values) if len(values) > 1 else 0.0
    return AggregateRow(config.terrain_slope, config.change_terrain, config.payload, mean, std, len(ok), failures)


TrialHook = Callable[[ScenarioConfig, TrialResult], None]


def run_scenario(
    config: ScenarioConfig, plugins: PluginSet | None = None, on_trial: TrialHook | None = None
) -> AggregateTable:
    """All trials of one scenario as a single-row table."""
    params = config.params()
    world = config.world()
    grid = rasterize(world, params.planning.resolution) if config.category == 3 else None
    results = []
    for trial in range(config.trials):
        result = run_trial(config, trial, plugins, params=params, world=world, grid=grid)
        if on_trial:
            on_trial(config, result)
        results.append(result)
    return AggregateTable(config.category, (aggregate(config, results),))


def run_matrix(
    config: ScenarioConfig, plugins: PluginSet | None = None, on_trial: TrialHook | None = None
) -> AggregateTable:
    """Every slope / terrain-change / payload combination, ``config.trials`` trials each."""
    rows = []
    for slope, change in CONDITIONS:
        for payload in PAYLOADS:
            cell = replace(config, terrain_slope=slope, change_terrain=change, payload=payload)
            rows.extend(run_scenario(cell, plugins, on_trial).rows)
    return AggregateTable(config.category, tuple(rows))


__all__ = [
    "AggregateRow",
    "AggregateTable",
    "BenchParams",
    "Category1Profile",
    "GlobalParams",
    "LowLevelParams",
    "ScenarioConfig",
    "TrackingParams",
    "TrialResult",
    "run_category1",
    "run_category2",
    "run_category3",
    "run_matrix",
    "run_scenario",
    "run_trial",
    "simulate",
]
