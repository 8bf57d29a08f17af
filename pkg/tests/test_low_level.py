import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from greenbench.errors import InvariantError
from greenbench.low_level import (
    FeedforwardConfig,
    LowLevelState,
    PidController,
    PidGains,
    antiwindup_update,
    closed_loop_poles,
    estimate_slope_torque,
    feedforward_gain,
    identify_static_gain,
    low_level_step,
    pid_step,
    reference_filter_step,
)
from greenbench.physics import RobotParams, WheelState, motor_first_order, step_wheel
from greenbench.world import TerrainSample

P = RobotParams()
FLAT = TerrainSample(2, 0.8, 0.01, 0.75, 0.0)
SAND = TerrainSample(3, 0.6, 0.05, 1.0, 0.0)


# -- reference filter --------------------------------------------------------------


def _filter_trace(u, tau_f, n_f, dt, steps):
    state = LowLevelState()
    out = []
    for _ in range(steps):
        y, state = reference_filter_step(state, u, tau_f, n_f, dt)
        out.append(y)
    return out


def test_filter_first_order_step_at_time_constant():
    y = _filter_trace(1.0, 1.75, 1, 0.01, 175)[-1]
    assert y == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)


def test_filter_zero_time_constant_passes_through():
    state = LowLevelState()
    for u in (0.3, -1.2, 4.0):
        y, state = reference_filter_step(state, u, 0.0, 2, 0.01)
        assert y == u


def test_filter_cascade_matches_gamma_step_response():
    # two equal lags: y(t) = 1 - e^{-t/T}(1 + t/T)
    t, tau_f = 2.0, 0.8
    y = _filter_trace(1.0, tau_f, 2, 0.001, 2000)[-1]
    s = t / tau_f
    assert y == pytest.approx(1.0 - math.exp(-s) * (1.0 + s), abs=2e-3)


@given(st.floats(0.05, 3.0), st.integers(1, 4), st.floats(-5, 5))
def test_filter_unit_dc_gain(tau_f, n_f, c):
    dt = 0.01
    steps = int(math.ceil(10 * n_f * tau_f / dt))
    y = _filter_trace(c, tau_f, n_f, dt, steps)[-1]
    assert abs(y - c) <= 0.01 * abs(c) + 1e-12


def test_filter_rejects_bad_dt():
    with pytest.raises(InvariantError):
        reference_filter_step(LowLevelState(), 1.0, 1.0, 1, 0.0)


# -- PID ------------------------------------------------------------------------------


def test_pid_zero_error_gives_zero():
    tau, _ = pid_step(LowLevelState(), PidGains(), 0.0, 0.0, 0.01)
    assert tau == 0.0


def test_pid_first_step_by_hand():
    tau, _ = pid_step(LowLevelState(), PidGains(), 1.0, 0.0, 0.01)
    # 70 * 1 + trapezoid 40 * 0.01 * (1 + 0) / 2
    assert tau == pytest.approx(70.2)


def test_derivative_filter_backward_euler():
    g = PidGains(kp=0.0, ki=0.0, kd=1.0, n_filter=10.0)
    tau, state = pid_step(LowLevelState(), g, 1.0, 0.0, 0.01)
    assert tau == pytest.approx(10.0 / 1.1)
    assert state.deriv_state == pytest.approx(10.0 / 1.1)


def test_gain_validation():
    with pytest.raises(InvariantError):
        PidGains(kp=-1.0)
    with pytest.raises(InvariantError):
        PidGains(n_filter=0.5)
    with pytest.raises(InvariantError):
        PidGains(kaw=0.0)
    PidGains(kaw=0.0, antiwindup=False)


def test_closed_loop_poles_from_quadratic():
    k_m, tau_m = 1.33, 2.97
    poles = closed_loop_poles(k_m, tau_m, 70.0, 40.0)
    a, b, c = tau_m, 1 + k_m * 70.0, k_m * 40.0
    disc = math.sqrt(b * b - 4 * a * c)
    oracle = sorted([(-b + disc) / (2 * a), (-b - disc) / (2 * a)], reverse=True)
    assert poles.real == pytest.approx(oracle, abs=1e-9)
    assert np.all(poles.imag == 0)
    # hand roots of 2.97 s^2 + 94.1 s + 53.2
    assert poles.real == pytest.approx([-0.575821, -31.107681], abs=1e-6)


# -- anti-windup ------------------------------------------------------------------------


def test_antiwindup_without_saturation_is_plain_integral():
    g = PidGains()
    s = antiwindup_update(LowLevelState(), g, 50.0, 50.0, 1.0, 0.01)
    assert s.integral == pytest.approx(40.0 * 0.01 * 0.5)


def test_antiwindup_zero_error_keeps_integral():
    s = antiwindup_update(LowLevelState(integral=3.0), PidGains(), 10.0, 10.0, 0.0, 0.01)
    assert s.integral == 3.0


def _saturated_integral(gains, seconds, omega_ref=50.0):
    # wheel blocked against a wall: the error never closes
    state = LowLevelState()
    trace = []
    for _ in range(int(seconds / 0.01)):
        _, state = low_level_step(state, gains, FeedforwardConfig(), omega_ref, 0.0, FLAT, 0.01, P)
        trace.append(state.integral)
    return np.array(trace)


def test_antiwindup_slows_integral_growth():
    with_aw = _saturated_integral(PidGains(), 5.0)
    without = _saturated_integral(PidGains(antiwindup=False), 5.0)
    assert np.all(np.abs(with_aw) <= np.abs(without))
    # once the output saturates the two traces separate for good
    split = np.nonzero(np.abs(with_aw) < np.abs(without))[0][0]
    assert np.all(np.abs(with_aw[split:]) < np.abs(without[split:]))


def test_antiwindup_integral_bounded_over_long_runs():
    short = np.abs(_saturated_integral(PidGains(), 20.0)).max()
    long = np.abs(_saturated_integral(PidGains(), 200.0)).max()
    assert long <= short * 1.001


# -- feedforward --------------------------------------------------------------------------


def test_slope_torque_by_hand():
    params = P.with_payload(70.0)
    terrain = TerrainSample(3, 0.6, 0.05, 1.0, 4.0)
    tau = estimate_slope_torque(terrain, 70.0, 0.75, params)
    m = 36.25
    f_crr = 0.05 * m * 9.81 * math.cos(math.radians(4))
    f_g = m * 9.81 * math.sin(math.radians(4))
    assert f_crr == pytest.approx(17.74, abs=0.01)
    assert f_g == pytest.approx(24.81, abs=0.01)
    assert tau == pytest.approx((f_crr + f_g) * 0.165 - 0.75)
    assert tau == pytest.approx(6.27, abs=0.01)


def test_slope_torque_balance_point():
    f_slope = 0.05 * 18.75 * 9.81
    omega = f_slope * P.r / 1.0
    assert estimate_slope_torque(SAND, 0.0, omega, P) == pytest.approx(0.0, abs=1e-12)


def test_feedforward_gain_identity():
    assert feedforward_gain(1.333, 1.333) == -1.0
    ff = FeedforwardConfig.from_static_gain(-0.5, 2.0)
    assert ff.k_ff == 0.25 and ff.enabled


def test_static_gain_degenerate_slopes():
    with pytest.raises(InvariantError):
        identify_static_gain(2.0, 2.0, terrain=SAND)


def test_static_gain_negative_on_sand():
    k_s = identify_static_gain(0.0, 4.0, terrain=SAND)
    assert math.isfinite(k_s) and k_s < 0


# -- composition -----------------------------------------------------------------------------


def test_saturation_clamps_demand():
    g = PidGains(kp=600.0, ki=0.0, tau_f=0.0)
    tau, state = low_level_step(LowLevelState(), g, FeedforwardConfig(), 1.0, 0.0, FLAT, 0.01, P)
    assert tau == 400.0
    assert state.last_tau_unsat == pytest.approx(600.0)
    tau, _ = low_level_step(LowLevelState(), g, FeedforwardConfig(), -1.0, 0.0, FLAT, 0.01, P)
    assert tau == -400.0


def test_zero_gains_give_zero_torque():
    g = PidGains(kp=0.0, ki=0.0, kd=0.0)
    state = LowLevelState()
    for e in (1.0, -3.0, 10.0):
        tau, state = low_level_step(state, g, FeedforwardConfig(), e, 0.0, FLAT, 0.01, P)
        assert tau == 0.0


def test_disabled_feedforward_ignores_gain():
    a = low_level_step(LowLevelState(), PidGains(), FeedforwardConfig(k_ff=5.0), 1.0, 0.0, SAND, 0.01, P)
    b = low_level_step(LowLevelState(), PidGains(), FeedforwardConfig(), 1.0, 0.0, SAND, 0.01, P)
    assert a == b


@given(st.lists(st.tuples(st.floats(-20, 20), st.floats(-20, 20)), min_size=1, max_size=30))
def test_output_never_exceeds_limit(seq):
    state = LowLevelState()
    g = PidGains(kp=300.0, ki=200.0)
    for ref, meas in seq:
        tau, state = low_level_step(state, g, FeedforwardConfig(k_ff=2.0, enabled=True), ref, meas, SAND, 0.01, P)
        assert abs(tau) <= P.tau_max


def _wheel_run(controller, terrain_at, seconds, omega_ref=0.75):
    wheel = WheelState()
    trace = []
    tau = 0.0
    for k in range(int(seconds / 0.005)):
        t = k * 0.005
        terrain = terrain_at(t)
        if k % 2 == 0:
            tau = controller.step(omega_ref, wheel.omega, terrain, 0.01)
        wheel, _, _ = step_wheel(wheel, tau, terrain, P, 0.005)
        trace.append((t, wheel.omega))
    return np.array(trace)


def test_step_settles_without_steady_state_error():
    trace = _wheel_run(PidController(), lambda t: FLAT, 30.0)
    outside = np.abs(trace[:, 1] - 0.75) > 0.02 * 0.75
    settle = trace[np.nonzero(outside)[0][-1] + 1, 0]
    assert settle <= 10.0
    assert trace[-1, 1] == pytest.approx(0.75, abs=1e-4)


def test_controller_reset_restores_initial_state():
    c = PidController()
    first = c.step(1.0, 0.0, FLAT, 0.01)
    c.step(1.0, 0.2, FLAT, 0.01)
    c.reset()
    assert c.step(1.0, 0.0, FLAT, 0.01) == first


def test_params_payload_changes_estimate():
    heavy = estimate_slope_torque(replace(SAND, phi_deg=4.0), 70.0, 0.75, P)
    light = estimate_slope_torque(replace(SAND, phi_deg=4.0), 0.0, 0.75, P)
    assert heavy > light
