"""Per-motor velocity controller: reference filter, PID, anti-windup, slope feedforward.

Signal flow for one motor and one control period::

    omega_ref -> filter -> omega_fil --(e = omega_fil - omega_meas)--> PID -> tau_pid
    tau_mff = tau_pid + K_ff * tau_slope_estimate
    tau_out = clamp(tau_mff, +-tau_max)      # integral corrected by back-calculation

The step functions are pure: they take a :class:`LowLevelState` and return the
output together with the next state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvariantError
from .physics import (
    RobotParams,
    WheelState,
    step_wheel,
)
from .world import TerrainSample


@dataclass(frozen=True)
class PidGains:
    """Controller gains; defaults are the reference low-level tuning."""

    kp: float = 70.0
    ki: float = 40.0
    kd: float = 0.0
    n_filter: float = 10.0
    kaw: float = 70.0 / 40.0
    antiwindup: bool = True
    tau_f: float = 70.0 / 40.0
    n_f: int = 1

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0:
            raise InvariantError("kp and ki must be >= 0")
        if self.n_filter < 1:
            raise InvariantError("derivative filter constant must be >= 1")
        if self.antiwindup and not self.kaw > 0:
            raise InvariantError("kaw must be > 0 when anti-windup is enabled")
        if self.tau_f < 0:
            raise InvariantError("tau_f must be >= 0")
        if not (isinstance(self.n_f, int) and self.n_f >= 1):
            raise InvariantError("n_f must be an integer >= 1")


@dataclass(frozen=True)
class FeedforwardConfig:
    """Static slope feedforward. ``payload`` is the mass the estimator assumes."""

    k_ff: float = 0.0
    k_s: float | None = None
    enabled: bool = False
    payload: float = 0.0

    @classmethod
    def from_static_gain(cls, k_s: float, k_m: float, payload: float = 0.0) -> FeedforwardConfig:
        return cls(k_ff=feedforward_gain(k_s, k_m), k_s=k_s, enabled=True, payload=payload)


@dataclass(frozen=True, slots=True)
class LowLevelState:
    integral: float = 0.0
    deriv_state: float = 0.0
    filter_state: tuple[float, ...] = ()
    prev_error: float = 0.0
    last_tau_sat: float = 0.0
    last_tau_unsat: float = 0.0


def feedforward_gain(k_s: float, k_m: float) -> float:
    if k_m == 0:
        raise InvariantError("motor gain K_m must be non-zero")
    return -k_s / k_m


def reference_filter_step(
    state: LowLevelState, omega_ref: float, tau_f: float, n_f: int, dt: float
) -> tuple[float, LowLevelState]:
    """``n_f`` cascaded first-order lags, discretised exactly for a held input."""
    if not dt > 0:
        raise InvariantError("dt must be > 0")
    if tau_f == 0.0:
        return omega_ref, replace(state, filter_state=(omega_ref,) * n_f)
    stages = state.filter_state
    if len(stages) != n_f:
        stages = (0.0,) * n_f
    a = 1.0 - math.exp(-dt / tau_f)
    out = []
    u = omega_ref
    for y in stages:
        y = y + a * (u - y)
        out.append(y)
        u = y
    return u, replace(state, filter_state=tuple(out))


def pid_step(
    state: LowLevelState, gains: PidGains, omega_fil: float, omega_meas: float, dt: float
) -> tuple[float, LowLevelState]:
    """PID torque before saturation.

    The returned state carries the new derivative state and error; the
    integral itself is only committed by :func:`antiwindup_update`.
    """
    if not dt > 0:
        raise InvariantError("dt must be > 0")
    e = omega_fil - omega_meas
    integral = state.integral + gains.ki * dt * 0.5 * (e + state.prev_error)
    deriv = (state.deriv_state + gains.n_filter * (e - state.prev_error)) / (1.0 + gains.n_filter * dt)
    tau = gains.kp * e + integral + gains.kd * deriv
    return tau, replace(state, deriv_state=deriv)


def antiwindup_update(
    state: LowLevelState,
    gains: PidGains,
    tau_unsat: float,
    tau_sat: float,
    e: float,
    dt: float,
) -> LowLevelState:
    """Commit the integral for this period with back-calculation.

    ``I' = K_I e + (tau_sat - tau_unsat) / K_aw``: the saturation excess bleeds
    the integrator toward the value that just brings the command to the limit.
    """
    integral = state.integral + gains.ki * dt * 0.5 * (e + state.prev_error)
    if gains.antiwindup:
        integral += dt * (tau_sat - tau_unsat) / gains.kaw
    return replace(
        state,
        integral=integral,
        prev_error=e,
        last_tau_sat=tau_sat,
        last_tau_unsat=tau_unsat,
    )


def estimate_slope_torque(
    terrain: TerrainSample, payload: float, omega: float, params: RobotParams
) -> float:
    """Model estimate of the torque terrain and grade oppose to a wheel.

    Rolling resistance opposes the direction of rotation; at rest it is taken
    as opposing forward motion.
    """
    m_pw = (params.m_robot + payload) / params.nW
    phi = math.radians(terrain.phi_deg)
    f_crr = terrain.crr * m_pw * params.g * math.cos(phi)
    f_g = m_pw * params.g * math.sin(phi)
    f_slope = math.copysign(1.0, omega) * f_crr + f_g
    return f_slope * params.r - terrain.cd * omega


def low_level_step(
    state: LowLevelState,
    gains: PidGains,
    ff: FeedforwardConfig,
    omega_ref: float,
    omega_meas: float,
    terrain: TerrainSample,
    dt: float,
    params: RobotParams,
) -> tuple[float, LowLevelState]:
    """One control period for one motor. Returns (saturated torque, next state)."""
    omega_fil, state = reference_filter_step(state, omega_ref, gains.tau_f, gains.n_f, dt)
    tau_pid, state = pid_step(state, gains, omega_fil, omega_meas, dt)
    tau_mff = tau_pid
    if ff.enabled:
        tau_mff += ff.k_ff * estimate_slope_torque(terrain, ff.payload, omega_meas, params)
    tau_out = min(params.tau_max, max(-params.tau_max, tau_mff))
    state = antiwindup_update(state, gains, tau_mff, tau_out, omega_fil - omega_meas, dt)
    return tau_out, state


class PidController:
    """Stateful baseline low-level controller for one motor."""

    def __init__(
        self,
        gains: PidGains | None = None,
        ff: FeedforwardConfig | None = None,
        params: RobotParams | None = None,
    ):
        self.gains = gains or PidGains()
        self.ff = ff or FeedforwardConfig()
        self.params = params or RobotParams()
        self.state = LowLevelState()

    def reset(self) -> None:
        self.state = LowLevelState()

    def step(self, omega_ref: float, omega_meas: float, terrain: TerrainSample, dt: float) -> float:
        tau, self.state = low_level_step(
            self.state, self.gains, self.ff, omega_ref, omega_meas, terrain, dt, self.params
        )
        return tau


def closed_loop_poles(k_m: float, tau_motor: float, kp: float, ki: float) -> np.ndarray:
    """Poles of a PI loop around K_m / (tau_motor s + 1), sorted from slowest."""
    roots = np.roots([tau_motor, 1.0 + k_m * kp, k_m * ki])
    return roots[np.argsort(-roots.real)]


# -- static gain identification ------------------------------------------------


@dataclass(frozen=True)
class WheelRun:
    omega: float
    slope_torque: float
    tau: float


def _settle_wheel(
    tau_fn,
    terrain: TerrainSample,
    params: RobotParams,
    dt: float,
    timeout: float,
    tol: float,
    omega0: float = 0.0,
) -> WheelRun:
    wheel = WheelState(omega=omega0)
    steps = int(round(timeout / dt))
    window = max(1, int(round(1.0 / dt)))
    last = wheel.omega
    for k in range(1, steps + 1):
        tau = tau_fn(wheel.omega, dt)
        wheel, _, _ = step_wheel(wheel, tau, terrain, params, dt)
        if k % window == 0:
            if abs(wheel.omega - last) < tol:
                return WheelRun(wheel.omega, wheel.slope_torque_actual, tau)
            last = wheel.omega
    raise InvariantError(f"wheel speed did not settle within {timeout:g} s")


def identify_static_gain(
    phi1: float,
    phi2: float,
    *,
    terrain: TerrainSample,
    params: RobotParams | None = None,
    gains: PidGains | None = None,
    omega_target: float = 0.75,
    dt: float = 0.005,
    control_dt: float = 0.01,
    timeout: float = 300.0,
    tol: float = 1e-7,
) -> float:
    """Static gain K_s = d(omega) / d(tau_slope_real) of one wheel.

    The wheel is first driven to ``omega_target`` at slope ``phi1`` by the
    closed loop; the torque it settles on is then held constant while the
    slope is switched to ``phi1`` and ``phi2``. With the torque fixed, the
    change in steady speed over the change in actual terrain torque is the
    gain. (Under the integrating loop itself the steady speed does not move,
    so the loop is opened for the two measurements.)
    """
    if phi1 == phi2:
        raise InvariantError("identification needs two different slopes")
    params = params or RobotParams()
    gains = gains or PidGains()
    ratio = max(1, int(round(control_dt / dt)))

    base = replace(terrain, phi_deg=phi1)
    ll = {"state": LowLevelState(), "k": 0, "tau": 0.0}

    def closed(omega, h):
        if ll["k"] % ratio == 0:
            ll["tau"], ll["state"] = low_level_step(
                ll["state"], gains, FeedforwardConfig(), omega_target, omega, base, h * ratio, params
            )
        ll["k"] += 1
        return ll["tau"]

    hold = _settle_wheel(closed, base, params, dt, timeout, tol)
    runs = [
        _settle_wheel(lambda omega, h: hold.tau, replace(terrain, phi_deg=phi), params, dt, timeout, tol, hold.omega)
        for phi in (phi1, phi2)
    ]
    d_tau = runs[1].slope_torque - runs[0].slope_torque
    if d_tau == 0.0:
        raise InvariantError("slope change produced no torque change")
    return (runs[1].omega - runs[0].omega) / d_tau
