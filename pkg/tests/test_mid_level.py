import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenbench.errors import InvariantError
from greenbench.mid_level import (
    ElasticBand,
    MidLevelConfig,
    TebTracker,
    band_cost,
    band_cost_terms,
    initial_band,
    lidar_ranges,
    mpc_step,
    optimize_band,
    propagate,
    range_sigma,
    rollout,
)
from greenbench.rng import NoiseStream
from greenbench.world import Disc

CFG = MidLevelConfig()


def make_band(states, inputs, dts, ref):
    return ElasticBand(np.asarray(states, float), np.asarray(inputs, float), np.asarray(dts, float), ref)


# -- dynamics -----------------------------------------------------------------------


def test_propagate_examples():
    assert propagate((0, 0, 0), (1, 0), 0.5) == pytest.approx((0.5, 0, 0))
    assert propagate((0, 0, math.pi / 2), (1, 0), 0.5) == pytest.approx((0, 0.5, math.pi / 2))
    assert propagate((1, 1, math.pi / 4), (math.sqrt(2), 1), 0.1) == pytest.approx((1.1, 1.1, math.pi / 4 + 0.1))


def test_propagate_wraps_heading():
    th = propagate((0, 0, 3.1), (0, 1), 0.1)[2]
    assert -math.pi < th <= math.pi
    assert th == pytest.approx(3.2 - 2 * math.pi)


@given(
    st.lists(st.tuples(st.floats(-1, 1), st.floats(-3, 3), st.floats(0.05, 1)), min_size=1, max_size=10),
    st.floats(-math.pi, math.pi),
)
def test_rollout_matches_repeated_propagate(steps, th0):
    inputs = np.array([s[:2] for s in steps])
    dts = np.array([s[2] for s in steps])
    states = rollout(np.array([1.0, 2.0, th0]), inputs, dts)
    x = (1.0, 2.0, th0)
    for k, (v, w, dt) in enumerate(steps):
        x = propagate(x, (v, w), dt)
        assert states[k + 1, :2] == pytest.approx(x[:2], abs=1e-9)
        assert math.cos(states[k + 1, 2] - x[2]) == pytest.approx(1.0, abs=1e-12)


# -- cost -------------------------------------------------------------------------------


def test_cost_zero_at_reference():
    band = make_band([[2, 0, 0], [2, 0, 0]], [[0, 0]], [0.0], (2, 0, 0))
    assert band_cost(band, CFG) == 0.0


def test_single_offset_node_costs_q_delta_squared():
    delta = 0.3
    band = make_band([[2 + delta, 0, 0], [2, 0, 0]], [[0, 0]], [0.0], (2, 0, 0))
    terms = band_cost_terms(band, CFG)
    assert terms["state"] == pytest.approx(50 * delta**2)


def _oracle_cost(band, cfg, obstacles):
    # term-by-term sum in reverse node order
    total = 0.0
    w = cfg.penalty_weight
    ref = band.reference
    for k in reversed(range(band.size + 1)):
        x = band.states[k]
        dth = math.remainder(x[2] - ref[2], 2 * math.pi)
        total += cfg.q_diag[0] * (x[0] - ref[0]) ** 2 + cfg.q_diag[1] * (x[1] - ref[1]) ** 2 + cfg.q_diag[2] * dth**2
        for cx, cy, r in reversed(obstacles):
            gap = cfg.r_robot + r + cfg.d_safe - math.hypot(x[0] - cx, x[1] - cy)
            total += w * max(gap, 0.0) ** 2
    for k in reversed(range(band.size)):
        v, om = band.inputs[k]
        dt = band.dts[k]
        total += cfg.r_diag[0] * v**2 + cfg.r_diag[1] * om**2 + cfg.lambda_t * dt**2
        nxt = propagate(band.states[k], (v, om), dt)
        d = band.states[k + 1] - np.array(nxt)
        d[2] = math.remainder(d[2], 2 * math.pi)
        total += w * float(d @ d)
        total += w * (max(abs(v) - cfg.v_max, 0.0) ** 2 + max(abs(om) - cfg.omega_max, 0.0) ** 2)
        total += w * max(abs(v) * dt - cfg.max_node_spacing, 0.0) ** 2
    return total


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_cost_matches_term_by_term_oracle(seed, p):
    rng = np.random.default_rng(seed)
    band = make_band(
        rng.uniform(-2, 2, (p + 1, 3)),
        rng.uniform(-1.5, 1.5, (p, 2)) * [1, 3],
        rng.uniform(0.05, 1, p),
        tuple(rng.uniform(-2, 2, 3)),
    )
    obstacles = [tuple(o) for o in rng.uniform([-2, -2, 0.1], [2, 2, 0.5], (3, 3))]
    got = band_cost(band, CFG, np.array(obstacles))
    assert got == pytest.approx(_oracle_cost(band, CFG, obstacles), rel=1e-12)


def test_config_validation():
    with pytest.raises(InvariantError):
        MidLevelConfig(q_diag=(-1.0, 1.0, 1.0))
    with pytest.raises(InvariantError):
        MidLevelConfig(d_safe=0.0)
    with pytest.raises(InvariantError):
        MidLevelConfig(iteration_budget=0)


# -- optimiser ---------------------------------------------------------------------------


def _defect(band):
    pred = np.array([propagate(band.states[k], band.inputs[k], band.dts[k]) for k in range(band.size)])
    return float(np.max(np.hypot(*(band.states[1:, :2] - pred[:, :2]).T)))


def test_obstacle_free_band_reaches_goal():
    ref = (2.0, 0.0, 0.0)
    band = optimize_band(initial_band((0, 0, 0), ref, None, CFG), None, CFG)
    assert math.hypot(band.states[-1, 0] - 2.0, band.states[-1, 1]) <= CFG.success_tolerance
    assert _defect(band) <= 1e-3
    assert np.all(np.abs(band.inputs[:, 0]) <= CFG.v_max)
    assert np.all(np.abs(band.inputs[:, 1]) <= CFG.omega_max)
    assert np.all((band.dts >= CFG.dt_min) & (band.dts <= CFG.dt_max))


def test_optimal_band_is_fixed_point():
    cfg = MidLevelConfig(dt_min=0.0)
    band = make_band([[2, 0, 0]] * 4, [[0, 0]] * 3, [0.0] * 3, (2, 0, 0))
    out = optimize_band(band, None, cfg)
    assert band_cost(out, cfg) == 0.0
    assert np.array_equal(out.states, band.states)


def test_band_keeps_clear_of_disc():
    obstacle = np.array([[2.0, 0.0, 0.3]])
    ref = (4.0, 0.0, 0.0)
    band = optimize_band(initial_band((0, 0, 0), ref, obstacle, CFG), obstacle, CFG)
    gap = np.hypot(band.states[:, 0] - 2.0, band.states[:, 1]) - CFG.r_robot - 0.3
    assert gap.min() >= CFG.d_safe - 0.01


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_cost_never_increases_between_iterates(seed):
    rng = np.random.default_rng(seed)
    pose = (*rng.uniform(-1, 1, 2), rng.uniform(-math.pi, math.pi))
    ref = (*rng.uniform(-3, 3, 2), 0.0)
    start = initial_band(pose, ref, None, CFG)
    start = ElasticBand(start.states, start.inputs + rng.normal(0, 0.3, start.inputs.shape), start.dts, ref)
    costs = []
    out = optimize_band(rollout_band(start), None, CFG, on_iterate=lambda b: costs.append(band_cost(b, CFG)))
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert band_cost(out, CFG) <= costs[0]


def rollout_band(band):
    states = rollout(band.states[0], band.inputs, band.dts)
    return ElasticBand(states, band.inputs, band.dts, band.reference)


# -- receding horizon ---------------------------------------------------------------------


def test_mpc_done_at_final_waypoint():
    r = mpc_step((1.0, 1.0, 0.0), [(1.05, 1.0)], None, CFG)
    assert (r.v, r.omega, r.done) == (0.0, 0.0, True)


def test_mpc_consumes_reached_waypoints():
    r = mpc_step((0.0, 0.0, 0.0), [(0.1, 0.0), (3.0, 0.0)], None, CFG)
    assert r.waypoint_index == 1 and not r.done


def test_mpc_is_deterministic_from_same_state():
    a = mpc_step((0, 0, 0.3), [(3.0, 1.0)], np.array([[1.5, 0.5, 0.2]]), CFG)
    b = mpc_step((0, 0, 0.3), [(3.0, 1.0)], np.array([[1.5, 0.5, 0.2]]), CFG)
    assert (a.v, a.omega, a.predicted) == (b.v, b.omega, b.predicted)


def test_mpc_reaches_first_corridor_waypoint():
    tracker = TebTracker(CFG)
    pose = (10.1, 3.0, 0.78)
    target = (10.2, 13.7)
    for k in range(400):
        r = tracker.step(pose, [target], None)
        assert abs(r.v) <= 1.0 and abs(r.omega) <= 3.2
        if r.done:
            break
        pose = propagate(pose, (r.v, r.omega), 0.1)
    assert r.done and k * 0.1 <= 40.0
    assert math.hypot(pose[0] - target[0], pose[1] - target[1]) <= CFG.success_tolerance


def test_tracker_restarts_sequence_on_new_plan():
    t = TebTracker(CFG)
    t.step((0, 0, 0), [(0.05, 0.0), (3.0, 0.0)], None)
    assert t.index == 1
    t.step((0, 0, 0), [(5.0, 0.0)], None)
    assert t.index == 0
    t.reset()
    assert t.band is None


# -- range sensing -------------------------------------------------------------------------


def test_lidar_exact_without_noise():
    obs = [Disc(0, (2.0, 0.0), 0.5), Disc(1, (0.0, 6.0), 0.5)]
    seen = lidar_ranges((0, 0, 0), obs)
    assert [o.id for o in seen] == [0]
    assert seen[0].range == pytest.approx(1.5)
    assert seen[0].center == pytest.approx((2.0, 0.0))


def test_range_sigma_bands():
    assert range_sigma(0.5) == 0.01
    assert range_sigma(2.0) == pytest.approx(0.02)


def test_lidar_noise_statistics_and_reproducibility():
    obs = [Disc(0, (2.5, 0.0), 0.5)]
    def draws(seed):
        rng = NoiseStream(seed, "lidar")
        return np.array([lidar_ranges((0, 0, 0), obs, True, rng)[0].range for _ in range(20_000)])
    a = draws(5)
    assert a.std() == pytest.approx(0.02, rel=0.05)
    assert abs(a.mean() - 2.0) <= 3 * 0.02 / math.sqrt(a.size)
    assert np.array_equal(a, draws(5))


def test_noisy_lidar_needs_stream():
    with pytest.raises(InvariantError):
        lidar_ranges((0, 0, 0), [], noise=True)
