"""Mid-level tracker: model predictive control over a timed elastic band.

The band is a sequence of P intervals, each with an input ``u_k = (v_k, w_k)``
and a free duration ``dt_k``; the states follow the differential-drive update

    x_{k+1} = x_k + dt_k v_k cos(theta_k)
    y_{k+1} = y_k + dt_k v_k sin(theta_k)
    theta_{k+1} = theta_k + dt_k w_k

The optimiser works on the inputs and durations only and rebuilds the states
by rolling the model forward from the measured pose, so the dynamics hold
exactly. Velocity limits and duration bounds are enforced by projection;
node spacing and obstacle clearance enter as one-sided quadratic penalties.
The resulting least-squares problem is solved with a damped Gauss-Newton
(Levenberg-Marquardt) iteration that only accepts cost-decreasing steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvariantError
from .physics import wrap_angle
from .rng import NoiseStream
from .world import Disc, Obstacle


@dataclass(frozen=True)
class MidLevelConfig:
    q_diag: tuple[float, float, float] = (50.0, 50.0, 50.0)
    r_diag: tuple[float, float] = (0.5, 1.0)
    lambda_t: float = 1.0
    d_safe: float = 0.5
    r_robot: float = 0.4
    v_max: float = 1.0
    omega_max: float = 3.2
    max_node_spacing: float = 0.4
    success_tolerance: float = 0.2
    iteration_budget: int = 50
    dt_min: float = 0.05
    dt_max: float = 1.0
    max_nodes: int = 25
    # penalty weight relative to the largest state weight
    penalty_scale: float = 1e3
    # extra clearance the optimiser aims for beyond d_safe, absorbs the
    # residual violation a finite penalty leaves
    clearance_margin: float = 0.05
    lidar_range: float = 4.0

    def __post_init__(self):
        if any(q < 0 for q in self.q_diag) or any(r < 0 for r in self.r_diag) or self.lambda_t < 0:
            raise InvariantError("mid-level weights must be >= 0")
        if len(self.q_diag) != 3 or len(self.r_diag) != 2:
            raise InvariantError("q_diag needs 3 entries and r_diag 2")
        if not self.d_safe > 0:
            raise InvariantError("d_safe must be > 0")
        if not self.success_tolerance > 0:
            raise InvariantError("success_tolerance must be > 0")
        if self.iteration_budget < 1:
            raise InvariantError("iteration_budget must be >= 1")
        if not (0 <= self.dt_min <= self.dt_max and self.dt_max > 0):
            raise InvariantError("need 0 <= dt_min <= dt_max")
        if not (self.v_max > 0 and self.omega_max > 0 and self.max_node_spacing > 0):
            raise InvariantError("velocity bounds and node spacing must be > 0")

    @property
    def penalty_weight(self) -> float:
        return self.penalty_scale * max(max(self.q_diag), 1.0)


@dataclass(frozen=True)
class BandNode:
    state: tuple[float, float, float]
    input: tuple[float, float]
    dt: float


@dataclass(frozen=True, eq=False)
class ElasticBand:
    """States ``(P+1, 3)``, inputs ``(P, 2)`` and durations ``(P,)`` toward ``reference``."""

    states: np.ndarray
    inputs: np.ndarray
    dts: np.ndarray
    reference: tuple[float, float, float]
    converged: bool = True
    iterations: int = 0
    cost_history: tuple[float, ...] = ()

    def __post_init__(self):
        p = len(self.dts)
        if p < 1 or self.inputs.shape != (p, 2) or self.states.shape != (p + 1, 3):
            raise InvariantError("band arrays have inconsistent shapes")

    @property
    def size(self) -> int:
        return len(self.dts)

    @property
    def nodes(self) -> list[BandNode]:
        return [
            BandNode(tuple(self.states[k]), tuple(self.inputs[k]), float(self.dts[k]))
            for k in range(self.size)
        ]

    def pose_at(self, t: float) -> tuple[float, float, float]:
        """Predicted pose ``t`` seconds after the first node."""
        if t <= 0:
            return tuple(self.states[0])
        elapsed = 0.0
        for k in range(self.size):
            if t <= elapsed + self.dts[k]:
                return propagate(self.states[k], self.inputs[k], t - elapsed)
            elapsed += self.dts[k]
        return tuple(self.states[-1])


def propagate(state, u, dt: float) -> tuple[float, float, float]:
    x, y, th = state
    v, w = u
    return (x + dt * v * math.cos(th), y + dt * v * math.sin(th), wrap_angle(th + dt * w))


def rollout(x0, inputs: np.ndarray, dts: np.ndarray) -> np.ndarray:
    """States from ``x0`` under the inputs; headings are left unwrapped."""
    p = len(dts)
    states = np.empty((p + 1, 3))
    states[0] = x0
    v, w = inputs[:, 0], inputs[:, 1]
    th = x0[2] + np.concatenate(([0.0], np.cumsum(w * dts)))
    states[:, 2] = th
    states[1:, 0] = x0[0] + np.cumsum(dts * v * np.cos(th[:-1]))
    states[1:, 1] = x0[1] + np.cumsum(dts * v * np.sin(th[:-1]))
    return states


def obstacle_array(obstacles) -> np.ndarray:
    """Normalise obstacles to an ``(n, 3)`` array of discs (cx, cy, radius)."""
    if obstacles is None:
        return np.zeros((0, 3))
    if isinstance(obstacles, np.ndarray):
        return obstacles.reshape(-1, 3).astype(float)
    rows = []
    for ob in obstacles:
        if isinstance(ob, Disc):
            rows.append((ob.center[0], ob.center[1], ob.radius))
        elif isinstance(ob, Observation):
            rows.append((ob.center[0], ob.center[1], ob.radius))
        else:
            rows.append(tuple(ob))
    return np.array(rows, dtype=float).reshape(-1, 3)


def _wrap_array(a: np.ndarray) -> np.ndarray:
    return np.remainder(a + np.pi, 2.0 * np.pi) - np.pi


# -- cost ----------------------------------------------------------------------


def band_cost_terms(band: ElasticBand, config: MidLevelConfig, obstacles=None) -> dict[str, float]:
    """Each part of the band cost separately.

    Stage terms: ``state`` (Q-weighted deviation of every node from the
    reference, heading error wrapped), ``input`` (R-weighted) and ``time``
    (``lambda_t * dt^2``). Penalty terms (weight ``config.penalty_weight`` on
    squared violations): ``defect``, ``velocity``, ``spacing`` and
    ``collision`` (required distance ``r_robot + r_O + d_safe``).
    """
    q = np.asarray(config.q_diag)
    r = np.asarray(config.r_diag)
    ref = np.asarray(band.reference, dtype=float)
    dev = band.states - ref
    dev[:, 2] = _wrap_array(dev[:, 2])
    terms = {
        "state": float(np.sum(q * dev**2)),
        "input": float(np.sum(r * band.inputs**2)),
        "time": float(config.lambda_t * np.sum(band.dts**2)),
    }
    w = config.penalty_weight
    pred = np.array([propagate(band.states[k], band.inputs[k], band.dts[k]) for k in range(band.size)])
    defect = band.states[1:] - pred
    defect[:, 2] = _wrap_array(defect[:, 2])
    terms["defect"] = float(w * np.sum(defect**2))
    v_ex = np.maximum(np.abs(band.inputs[:, 0]) - config.v_max, 0.0)
    w_ex = np.maximum(np.abs(band.inputs[:, 1]) - config.omega_max, 0.0)
    terms["velocity"] = float(w * (np.sum(v_ex**2) + np.sum(w_ex**2)))
    sp = np.maximum(np.abs(band.inputs[:, 0]) * band.dts - config.max_node_spacing, 0.0)
    terms["spacing"] = float(w * np.sum(sp**2))
    obs = obstacle_array(obstacles)
    if obs.size:
        d = np.hypot(band.states[:, None, 0] - obs[None, :, 0], band.states[:, None, 1] - obs[None, :, 1])
        viol = np.maximum(config.r_robot + obs[None, :, 2] + config.d_safe - d, 0.0)
        terms["collision"] = float(w * np.sum(viol**2))
    else:
        terms["collision"] = 0.0
    return terms


def band_cost(band: ElasticBand, config: MidLevelConfig, obstacles=None) -> float:
    return float(sum(band_cost_terms(band, config, obstacles).values()))


# -- optimiser -------------------------------------------------------------------


class _Problem:
    """Least-squares residuals and Jacobian for a fixed start pose and reference."""

    def __init__(self, x0, ref, config: MidLevelConfig, obstacles: np.ndarray, margin: float):
        self.x0 = np.asarray(x0, dtype=float)
        self.ref = np.asarray(ref, dtype=float)
        self.cfg = config
        self.obs = obstacles
        self.sq_q = np.sqrt(np.asarray(config.q_diag, dtype=float))
        self.sq_r = np.sqrt(np.asarray(config.r_diag, dtype=float))
        self.sq_l = math.sqrt(config.lambda_t)
        self.sq_w = math.sqrt(config.penalty_weight)
        self.d_req = config.r_robot + obstacles[:, 2] + config.d_safe + margin

    def bounds(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Box around ``z``; the duration cap also keeps ``|v| dt`` within the node spacing."""
        cfg = self.cfg
        p = len(z) // 3
        speed = np.abs(z[:p])
        with np.errstate(divide="ignore"):
            dt_cap = np.where(speed > 0, cfg.max_node_spacing / speed, np.inf)
        lo = np.concatenate([np.full(p, -cfg.v_max), np.full(p, -cfg.omega_max), np.full(p, cfg.dt_min)])
        hi = np.concatenate([
            np.full(p, cfg.v_max),
            np.full(p, cfg.omega_max),
            np.maximum(np.minimum(cfg.dt_max, dt_cap), cfg.dt_min),
        ])
        return lo, hi

    def project(self, z: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        p = len(z) // 3
        z = z.copy()
        z[:p] = np.clip(z[:p], -cfg.v_max, cfg.v_max)
        z[p : 2 * p] = np.clip(z[p : 2 * p], -cfg.omega_max, cfg.omega_max)
        z[2 * p :] = np.clip(z[2 * p :], cfg.dt_min, cfg.dt_max)
        # node spacing: shorten the interval first, then slow down if the
        # interval is already at its minimum
        v, dt = z[:p], z[2 * p :]
        over = np.abs(v) * dt > cfg.max_node_spacing
        if np.any(over):
            dt[over] = np.maximum(cfg.max_node_spacing / np.abs(v[over]), cfg.dt_min)
            still = np.abs(v) * dt > cfg.max_node_spacing
            v[still] = np.sign(v[still]) * cfg.max_node_spacing / dt[still]
        return z

    def residuals(self, z: np.ndarray, jacobian: bool = False):
        cfg = self.cfg
        p = len(z) // 3
        v, w, dt = z[:p], z[p : 2 * p], z[2 * p :]
        th = self.x0[2] + np.concatenate(([0.0], np.cumsum(w * dt)))
        c, s = np.cos(th[:-1]), np.sin(th[:-1])
        xs = self.x0[0] + np.concatenate(([0.0], np.cumsum(dt * v * c)))
        ys = self.x0[1] + np.concatenate(([0.0], np.cumsum(dt * v * s)))
        xk, yk = xs[1:], ys[1:]

        parts = [
            self.sq_q[0] * (xk - self.ref[0]),
            self.sq_q[1] * (yk - self.ref[1]),
            self.sq_q[2] * _wrap_array(th[1:] - self.ref[2]),
            self.sq_r[0] * v,
            self.sq_r[1] * w,
            self.sq_l * dt,
        ]
        spacing = np.abs(v) * dt - cfg.max_node_spacing
        sp_act = spacing > 0
        parts.append(self.sq_w * spacing[sp_act])
        if self.obs.size:
            ddx = xk[:, None] - self.obs[None, :, 0]
            ddy = yk[:, None] - self.obs[None, :, 1]
            dist = np.hypot(ddx, ddy)
            viol = self.d_req[None, :] - dist
            col_k, col_j = np.nonzero(viol > 0)
            parts.append(self.sq_w * viol[col_k, col_j])
        else:
            col_k = col_j = np.zeros(0, dtype=int)
        res = np.concatenate(parts)
        if not jacobian:
            return res

        lower = np.tri(p)
        dxv = lower * (dt * c)[None, :]
        dyv = lower * (dt * s)[None, :]
        dthw = lower * dt[None, :]
        dthdt = lower * w[None, :]
        ydiff = yk[:, None] - yk[None, :]
        xdiff = xk[:, None] - xk[None, :]
        dxw = -lower * dt[None, :] * ydiff
        dyw = lower * dt[None, :] * xdiff
        dxdt = lower * ((v * c)[None, :] - w[None, :] * ydiff)
        dydt = lower * ((v * s)[None, :] + w[None, :] * xdiff)
        jx = np.hstack([dxv, dxw, dxdt])
        jy = np.hstack([dyv, dyw, dydt])
        jth = np.hstack([np.zeros((p, p)), dthw, dthdt])

        eye = np.eye(p)
        zero = np.zeros((p, p))
        rows = [
            self.sq_q[0] * jx,
            self.sq_q[1] * jy,
            self.sq_q[2] * jth,
            np.hstack([self.sq_r[0] * eye, zero, zero]),
            np.hstack([zero, self.sq_r[1] * eye, zero]),
            np.hstack([zero, zero, self.sq_l * eye]),
        ]
        idx = np.nonzero(sp_act)[0]
        jsp = np.zeros((len(idx), 3 * p))
        jsp[np.arange(len(idx)), idx] = self.sq_w * np.sign(v[idx]) * dt[idx]
        jsp[np.arange(len(idx)), 2 * p + idx] = self.sq_w * np.abs(v[idx])
        rows.append(jsp)
        if len(col_k):
            nx = ddx[col_k, col_j] / np.maximum(dist[col_k, col_j], 1e-12)
            ny = ddy[col_k, col_j] / np.maximum(dist[col_k, col_j], 1e-12)
            rows.append(-self.sq_w * (nx[:, None] * jx[col_k] + ny[:, None] * jy[col_k]))
        return res, np.vstack(rows)

    def cost(self, z: np.ndarray) -> float:
        r = self.residuals(z)
        return float(r @ r)

    def clearance_violation(self, z: np.ndarray) -> float:
        """Largest shortfall against the unpadded clearance requirement."""
        if not self.obs.size:
            return 0.0
        p = len(z) // 3
        states = rollout(self.x0, np.column_stack([z[:p], z[p : 2 * p]]), z[2 * p :])
        d = np.hypot(states[1:, None, 0] - self.obs[None, :, 0], states[1:, None, 1] - self.obs[None, :, 1])
        need = self.cfg.r_robot + self.obs[None, :, 2] + self.cfg.d_safe
        return float(np.max(need - d, initial=0.0))


def _levenberg_marquardt(problem: _Problem, z: np.ndarray, budget: int, on_accept=None):
    """Monotone damped Gauss-Newton on the feasible box.

    Variables sitting on a bound with the gradient pushing outward are held
    fixed for the step; the step is then projected back onto the box. A step
    is accepted only when it lowers the cost. Returns (z, converged,
    iterations, accepted costs). ``on_accept(z)`` sees every accepted iterate.
    """
    r, jac = problem.residuals(z, jacobian=True)
    cost = float(r @ r)
    costs = [cost]
    mu = 1e-3
    converged = False
    it = 0
    while it < budget:
        it += 1
        g = jac.T @ r
        lo, hi = problem.bounds(z)
        tol = 1e-12
        held = ((z <= lo + tol) & (g > 0)) | ((z >= hi - tol) & (g < 0))
        free = ~held
        if not np.any(g[free]):
            converged = True
            break
        jf = jac[:, free]
        a = jf.T @ jf
        damp = mu * (np.diag(a) + 1e-6)
        try:
            step_f = np.linalg.solve(a + np.diag(damp), -g[free])
        except np.linalg.LinAlgError:
            mu *= 10.0
            continue
        step = np.zeros_like(z)
        step[free] = step_f
        cand = problem.project(z + step)
        r_new, jac_new = problem.residuals(cand, jacobian=True)
        new_cost = float(r_new @ r_new)
        if new_cost < cost:
            gain = cost - new_cost
            z, r, jac = cand, r_new, jac_new
            cost = new_cost
            costs.append(cost)
            if on_accept is not None:
                on_accept(z)
            mu = max(mu / 3.0, 1e-9)
            if gain <= 1e-7 * cost + 1e-12:
                converged = True
                break
        else:
            mu *= 4.0
            if mu > 1e8:
                # no descent direction left within the bounds
                converged = True
                break
    return z, converged, it, costs


def _as_vector(band: ElasticBand) -> np.ndarray:
    return np.concatenate([band.inputs[:, 0], band.inputs[:, 1], band.dts])


def _band_from(x0, z, ref, **kw) -> ElasticBand:
    p = len(z) // 3
    inputs = np.column_stack([z[:p], z[p : 2 * p]])
    states = rollout(np.asarray(x0, dtype=float), inputs, z[2 * p :])
    states[:, 2] = _wrap_array(states[:, 2])
    return ElasticBand(states, inputs, z[2 * p :].copy(), tuple(float(r) for r in ref), **kw)


def optimize_band(band: ElasticBand, obstacles, config: MidLevelConfig, on_iterate=None) -> ElasticBand:
    """Optimise the band's inputs and durations from its first state.

    The returned band never costs more than the input band under
    :func:`band_cost`. ``converged`` is False when the iteration budget ran out.
    ``on_iterate(band)``, if given, is called with the projected starting band
    and every accepted iterate.
    """
    obs = obstacle_array(obstacles)
    x0 = band.states[0]
    start_cost = band_cost(band, config, obs)
    z = _as_vector(band)
    total_it = 0
    history: list[float] = []
    converged = False
    margin = config.clearance_margin if obs.size else 0.0
    weight_scale = 1.0
    cfg = config
    for _ in range(3):
        problem = _Problem(x0, band.reference, cfg, obs, margin)
        z = problem.project(z)
        notify = None
        if on_iterate is not None:
            on_iterate(_band_from(x0, z, band.reference))
            notify = lambda zz: on_iterate(_band_from(x0, zz, band.reference))  # noqa: E731
        z, converged, it, costs = _levenberg_marquardt(problem, z, config.iteration_budget - total_it, notify)
        total_it += it
        history.extend(costs)
        # escalate the penalty if the clearance is still short and budget remains
        if problem.clearance_violation(z) <= 0.01 or total_it >= config.iteration_budget:
            break
        weight_scale *= 10.0
        cfg = replace(config, penalty_scale=config.penalty_scale * weight_scale)
    out = _band_from(x0, z, band.reference, converged=converged, iterations=total_it, cost_history=tuple(history))
    if band_cost(out, config, obs) > start_cost:
        return replace(band, converged=False, iterations=total_it, cost_history=tuple(history))
    return out


# -- band construction -------------------------------------------------------------


def band_size(distance: float, config: MidLevelConfig) -> int:
    p = int(math.ceil(distance / config.max_node_spacing)) + 3
    return max(2, min(p, config.max_nodes))


def initial_band(pose, reference, obstacles, config: MidLevelConfig, size: int | None = None) -> ElasticBand:
    """Deterministic starting band: steer toward the goal, around blocking discs.

    At each node the heading aims at the goal unless an obstacle disc (grown
    by the clearance requirement) blocks the straight line, in which case it
    aims at the tangent on the side closer to the goal bearing (left on ties).
    """
    obs = obstacle_array(obstacles)
    x, y, th = (float(c) for c in pose)
    gx, gy = reference[0], reference[1]
    p = size or band_size(math.hypot(gx - x, gy - y), config)
    dt = min(max(config.max_node_spacing / config.v_max, config.dt_min), config.dt_max)
    inputs = np.zeros((p, 2))
    dts = np.full(p, dt)
    need = config.r_robot + obs[:, 2] + config.d_safe + config.clearance_margin if obs.size else None
    for k in range(p):
        dist = math.hypot(gx - x, gy - y)
        heading = math.atan2(gy - y, gx - x)
        if obs.size and dist > 1e-9:
            heading = _avoid(x, y, heading, dist, obs, need)
        err = wrap_angle(heading - th)
        w = min(config.omega_max, max(-config.omega_max, err / dt))
        v = config.v_max * max(0.0, math.cos(err))
        v = min(v, dist / dt, config.max_node_spacing / dt)
        inputs[k] = (v, w)
        x += dt * v * math.cos(th)
        y += dt * v * math.sin(th)
        th += dt * w
    x0 = np.array(pose, dtype=float)
    states = rollout(x0, inputs, dts)
    states[:, 2] = _wrap_array(states[:, 2])
    return ElasticBand(states, inputs, dts, tuple(float(r) for r in reference))


def _avoid(x, y, heading, dist, obs, need):
    ux, uy = math.cos(heading), math.sin(heading)
    rel_x = obs[:, 0] - x
    rel_y = obs[:, 1] - y
    along = rel_x * ux + rel_y * uy
    across = -rel_x * uy + rel_y * ux
    blocking = (along > 0) & (along < dist) & (np.abs(across) < need)
    if not np.any(blocking):
        return heading
    j = int(np.argmin(np.where(blocking, along, np.inf)))
    centre = math.atan2(rel_y[j], rel_x[j])
    rng = math.hypot(rel_x[j], rel_y[j])
    half = math.asin(min(1.0, need[j] / max(rng, 1e-9)))
    left, right = centre + half, centre - half
    if abs(wrap_angle(left - heading)) <= abs(wrap_angle(right - heading)):
        return left
    return right


def shift_band(band: ElasticBand, pose, size: int) -> ElasticBand:
    """Previous band advanced by one node and re-rolled from ``pose``."""
    inputs = np.vstack([band.inputs[1:], band.inputs[-1:]]) if band.size > 1 else band.inputs.copy()
    dts = np.concatenate([band.dts[1:], band.dts[-1:]]) if band.size > 1 else band.dts.copy()
    return _resize(pose, inputs, dts, band.reference, size)


def _resize(pose, inputs, dts, reference, size) -> ElasticBand:
    if len(dts) >= size:
        inputs, dts = inputs[:size], dts[:size]
    else:
        extra = size - len(dts)
        inputs = np.vstack([inputs, np.zeros((extra, 2))])
        dts = np.concatenate([dts, np.full(extra, dts[-1])])
    x0 = np.array(pose, dtype=float)
    states = rollout(x0, inputs, dts)
    states[:, 2] = _wrap_array(states[:, 2])
    return ElasticBand(states, inputs.copy(), dts.copy(), tuple(reference))


# -- receding horizon --------------------------------------------------------------


@dataclass(frozen=True)
class MpcResult:
    v: float
    omega: float
    predicted: tuple[float, float]
    band: ElasticBand | None
    done: bool
    waypoint_index: int


def mpc_step(
    pose,
    waypoints,
    obstacles,
    config: MidLevelConfig,
    previous: ElasticBand | None = None,
    waypoint_index: int = 0,
    control_dt: float = 0.1,
) -> MpcResult:
    """One receding-horizon step toward ``waypoints[waypoint_index]``.

    Waypoints within ``success_tolerance`` are consumed first. Returns the
    first band input, the pose the band predicts ``control_dt`` ahead and the
    band itself for warm starting the next call.
    """
    waypoints = [tuple(map(float, wp)) for wp in waypoints]
    x, y = float(pose[0]), float(pose[1])
    idx = waypoint_index
    while idx < len(waypoints) and math.hypot(waypoints[idx][0] - x, waypoints[idx][1] - y) <= config.success_tolerance:
        idx += 1
    if idx >= len(waypoints):
        return MpcResult(0.0, 0.0, (x, y), previous, True, idx)

    gx, gy = waypoints[idx]
    bearing = math.atan2(gy - y, gx - x)
    reference = (gx, gy, bearing)
    obs = obstacle_array(obstacles)
    size = band_size(math.hypot(gx - x, gy - y), config)

    candidates = [initial_band(pose, reference, obs, config, size)]
    if previous is not None and previous.reference[:2] == reference[:2]:
        candidates.append(_resize(pose, previous.inputs, previous.dts, reference, size))
        candidates.append(shift_band(replace(previous, reference=reference), pose, size))
    costs = [band_cost(b, config, obs) for b in candidates]
    start = candidates[int(np.argmin(costs))]
    band = optimize_band(start, obs, config)
    v, w = float(band.inputs[0, 0]), float(band.inputs[0, 1])
    v = min(config.v_max, max(-config.v_max, v))
    w = min(config.omega_max, max(-config.omega_max, w))
    pred = band.pose_at(control_dt)
    return MpcResult(v, w, (pred[0], pred[1]), band, False, idx)


# -- range sensing ---------------------------------------------------------------


@dataclass(frozen=True)
class Observation:
    """Obstacle seen by the range sensor, reconstructed as a disc."""

    id: int
    range: float
    center: tuple[float, float]
    radius: float


def range_sigma(distance: float) -> float:
    """Range noise: 10 mm below 1 m, 1 % of the distance from 1 to 4 m."""
    return 0.01 if distance < 1.0 else 0.01 * distance


def lidar_ranges(
    pose,
    obstacles: list[Obstacle],
    noise: bool = False,
    rng: NoiseStream | None = None,
    max_range: float = 4.0,
) -> list[Observation]:
    """Clearance to every obstacle within ``max_range``, optionally noisy.

    Each observation places a disc of the obstacle's local radius along the
    bearing to its nearest core point, at the measured range.
    """
    if noise and rng is None:
        raise InvariantError("noisy ranges need a noise stream")
    x, y = float(pose[0]), float(pose[1])
    out = []
    for ob in obstacles:
        clearance = ob.distance(x, y)
        if clearance > max_range:
            continue
        (cx, cy), radius = ob.nearest_core(x, y)
        measured = clearance + rng.normal(range_sigma(clearance)) if noise else clearance
        dx, dy = cx - x, cy - y
        norm = math.hypot(dx, dy)
        if norm > 0:
            scale = (measured + radius) / norm
            centre = (x + dx * scale, y + dy * scale)
        else:
            centre = (cx, cy)
        out.append(Observation(ob.id, measured, centre, radius))
    return out


class TebTracker:
    """Baseline mid-level plugin: MPC over an elastic band with waypoint sequencing.

    Handing in a different waypoint list (a new global plan) restarts the
    sequence at its first entry; the band is kept for warm starting.
    """

    def __init__(self, config: MidLevelConfig | None = None, control_dt: float = 0.1):
        self.config = config or MidLevelConfig()
        self.control_dt = control_dt
        self.band: ElasticBand | None = None
        self.index = 0
        self._waypoints: tuple | None = None

    def reset(self) -> None:
        self.band = None
        self.index = 0
        self._waypoints = None

    def step(self, pose, waypoints, obstacles) -> MpcResult:
        key = tuple(tuple(map(float, wp)) for wp in waypoints)
        if key != self._waypoints:
            self.index = 0
            self._waypoints = key
        result = mpc_step(pose, waypoints, obstacles, self.config, self.band, self.index, self.control_dt)
        self.band = result.band
        self.index = result.waypoint_index
        return result
