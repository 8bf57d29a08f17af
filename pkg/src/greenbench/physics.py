"""Plant model: per-side wheel/friction dynamics and differential-drive kinematics.

Each side (right, left) is one motor driving a wheel pair, modelled as a single
wheel with effective mass ``m_pw``. A physics step

1. evaluates the friction limit ``F_rmax = mu * m_pw * g``,
2. clamps the lateral force produced by the centripetal acceleration,
3. converts the motor command to shaft torque (``k_tau * tau - b * omega``),
   removes the terrain torque (rolling resistance, grade, damping),
4. computes the longitudinal ground force needed to roll without slip and
   clamps it to ``F_rmax``,
5. integrates the wheel speed with the residual angular acceleration.

When the ground force is inside the friction limit the wheel rolls and the
whole robot mass per wheel is accelerated; when it saturates the wheel slips
and the excess torque only spins the wheel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import InvariantError, PhysicsDivergence
from .rng import NoiseStream
from .world import TerrainSample, World, sector_at

G = 9.81
# speed scale (rad/s) over which rolling resistance changes sign; makes rest a
# fixed point instead of chattering around zero
ROLLING_SIGN_WIDTH = 0.05


@dataclass(frozen=True)
class RobotParams:
    """Physical robot parameters. ``m_v`` defaults to ``m_robot - nW * m_w``."""

    r: float = 0.165
    L_w: float = 0.555
    m_robot: float = 75.0
    m_w: float = 2.5
    m_v: float | None = None
    nW: int = 4
    J: float = 2.22
    b: float = 0.75
    k_tau: float = 1.0
    I_yy: float = 2.22
    tau_max: float = 400.0
    v_max: float = 1.0
    omega_max: float = 3.2
    g: float = G
    payload: float = 0.0

    def __post_init__(self):
        if self.m_v is None:
            object.__setattr__(self, "m_v", self.m_robot - self.nW * self.m_w)
        for name in ("r", "L_w", "m_robot", "m_w", "m_v", "J", "I_yy", "tau_max"):
            if not getattr(self, name) > 0:
                raise InvariantError(f"{name} must be > 0")
        if self.nW not in (1, 2, 3, 4):
            raise InvariantError("nW must be 1, 2, 3 or 4")
        if self.b < 0:
            raise InvariantError("b must be >= 0")
        if not 0.0 <= self.payload <= 70.0:
            raise InvariantError("payload must lie in [0, 70] kg")
        object.__setattr__(self, "m_pw", (self.m_robot + self.payload) / self.nW)

    def with_payload(self, payload: float) -> RobotParams:
        return replace(self, payload=float(payload))


@dataclass(frozen=True, slots=True)
class WheelState:
    omega: float = 0.0
    omega_ref: float = 0.0
    lateral_accel: float = 0.0
    applied_torque: float = 0.0
    slope_torque_actual: float = 0.0


@dataclass(frozen=True, slots=True)
class RobotState:
    x: float
    y: float
    theta: float
    right: WheelState = field(default_factory=WheelState)
    left: WheelState = field(default_factory=WheelState)
    v: float = 0.0
    omega: float = 0.0
    time: float = 0.0

    @property
    def pose(self) -> tuple[float, float, float]:
        return self.x, self.y, self.theta


@dataclass
class EncoderModel:
    """Additive Gaussian noise on the measured wheel speeds."""

    sigma: float = 0.02
    enabled: bool = True
    rng_right: NoiseStream | None = None
    rng_left: NoiseStream | None = None

    def __post_init__(self):
        if self.sigma < 0:
            raise InvariantError("encoder sigma must be >= 0")
        if self.enabled and self.sigma > 0 and (self.rng_right is None or self.rng_left is None):
            raise InvariantError("an enabled encoder model needs both noise streams")


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def inverse_kinematics(v: float, omega: float, params: RobotParams) -> tuple[float, float]:
    """Wheel speeds (right, left) that realise body velocities (v, omega)."""
    half = 0.5 * omega * params.L_w
    return (v + half) / params.r, (v - half) / params.r


def forward_kinematics(omega_r: float, omega_l: float, params: RobotParams) -> tuple[float, float]:
    v = 0.5 * params.r * (omega_r + omega_l)
    omega = params.r / params.L_w * (omega_r - omega_l)
    return v, omega


def max_friction(mu: float, m_pw: float, g: float = G) -> float:
    return mu * m_pw * g


def terrain_torque(terrain: TerrainSample, m_pw: float, omega: float, params: RobotParams) -> float:
    """Torque the ground actually opposes to a wheel turning at ``omega``."""
    phi = math.radians(terrain.phi_deg)
    f_crr = terrain.crr * m_pw * params.g * math.cos(phi)
    f_g = m_pw * params.g * math.sin(phi)
    rolling = f_crr * math.tanh(omega / ROLLING_SIGN_WIDTH)
    return (rolling + f_g) * params.r - terrain.cd * omega


def step_wheel(
    wheel: WheelState,
    tau_cmd: float,
    terrain: TerrainSample,
    params: RobotParams,
    dt: float,
) -> tuple[WheelState, float, float]:
    """Advance one wheel side by ``dt``. Returns (new state, F_long, F_lat)."""
    if not dt > 0:
        raise InvariantError("dt must be > 0")
    if abs(tau_cmd) > params.tau_max:
        raise InvariantError(f"|tau_cmd| = {abs(tau_cmd):g} exceeds tau_max = {params.tau_max:g}")
    m_pw = params.m_pw
    omega = wheel.omega
    f_rmax = max_friction(terrain.mu, m_pw, params.g)
    f_lat = min(f_rmax, max(-f_rmax, wheel.lateral_accel * m_pw))

    tau_slope = terrain_torque(terrain, m_pw, omega, params)
    tau_eff = params.k_tau * tau_cmd - params.b * omega - tau_slope
    damping = terrain.cd * omega
    # acceleration the wheel would have if it rolled without slip
    accel_roll = (tau_eff - damping) / (params.I_yy + m_pw * params.r * params.r)
    f_long = (tau_eff - params.I_yy * accel_roll - damping) / params.r
    f_long = min(f_rmax, max(-f_rmax, f_long))
    alpha = (tau_eff - params.r * f_long - damping) / params.I_yy
    new_omega = omega + alpha * dt

    if not (math.isfinite(new_omega) and math.isfinite(f_long) and math.isfinite(f_lat)):
        raise PhysicsDivergence(
            f"non-finite wheel update (omega={omega!r}, tau_cmd={tau_cmd!r}, alpha={alpha!r})"
        )
    new = WheelState(new_omega, wheel.omega_ref, wheel.lateral_accel, tau_cmd, tau_slope)
    return new, f_long, f_lat


def step_robot(
    state: RobotState,
    tau_r: float,
    tau_l: float,
    world: World,
    params: RobotParams,
    dt: float,
    omega_ref: tuple[float, float] | None = None,
) -> RobotState:
    """Advance the whole robot by ``dt`` under the given motor torques.

    ``params.payload`` must match ``world.payload_mass``. ``omega_ref`` only
    records the current wheel references in the state for logging.
    """
    if params.payload != world.payload_mass:
        raise InvariantError(
            f"params payload {params.payload:g} kg differs from world payload "
            f"{world.payload_mass:g} kg"
        )
    ground = sector_at(world, (state.x, state.y))
    pitch = world.slope.pitch_deg(state.x, state.y, state.theta)
    terrain = TerrainSample(ground.s, ground.mu, ground.crr, ground.cd, pitch)

    right, left = state.right, state.left
    if omega_ref is not None:
        right = replace(right, omega_ref=omega_ref[0])
        left = replace(left, omega_ref=omega_ref[1])
    right, _, _ = step_wheel(right, tau_r, terrain, params, dt)
    left, _, _ = step_wheel(left, tau_l, terrain, params, dt)

    v, omega = forward_kinematics(right.omega, left.omega, params)
    x = state.x + dt * v * math.cos(state.theta)
    y = state.y + dt * v * math.sin(state.theta)
    theta = wrap_angle(state.theta + dt * omega)
    a_wy = omega * v
    right = replace(right, lateral_accel=a_wy)
    left = replace(left, lateral_accel=a_wy)
    return RobotState(x, y, theta, right, left, v, omega, state.time + dt)


def measure_encoders(state: RobotState, model: EncoderModel) -> tuple[float, float]:
    """Noisy wheel-speed measurements (right, left)."""
    if not model.enabled or model.sigma == 0.0:
        return state.right.omega, state.left.omega
    return (
        state.right.omega + model.rng_right.normal(model.sigma),
        state.left.omega + model.rng_left.normal(model.sigma),
    )


def motor_first_order(params: RobotParams) -> tuple[float, float]:
    """Gain and time constant (K_m, tau_motor) of the motor model J w' + b w = k_tau tau."""
    if params.b <= 0:
        raise InvariantError("motor viscous friction b must be > 0 for a first-order model")
    return params.k_tau / params.b, params.J / params.b
