"""Trial logs and performance indices.

Per category ``nc`` each logged sample gives a normalised error ``e_k`` and
effort ``u_k``; ``SAE = sum |e_k|`` and ``SCI = sum (u_k - u_{k-1})^2``.
Composite costs: ``J1 = SAE_1 + SCI_1``, ``J2 = SAE_2 + SCI_2``,
``J3 = SAE_3``, ``JT2 = (J1 + J2) / 2`` and ``JT3 = (J1 + J2 + J3) / 3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError

BASE_COLUMNS = (
    "t",
    "omega_ref_r",
    "omega_ref_l",
    "omega_meas_r",
    "omega_meas_l",
    "omega_r",
    "omega_l",
    "tau_r",
    "tau_l",
    "x",
    "y",
    "theta",
    "s",
    "phi",
)
TRACKING_COLUMNS = ("v_cmd", "omega_cmd", "x_teb", "y_teb", "waypoint")
PLAN_COLUMNS = ("plan_x", "plan_y")


def columns_for(category: int) -> tuple[str, ...]:
    """Fixed CSV/log column order for a category."""
    if category == 1:
        return BASE_COLUMNS
    if category == 2:
        return BASE_COLUMNS + TRACKING_COLUMNS
    if category == 3:
        return BASE_COLUMNS + TRACKING_COLUMNS + PLAN_COLUMNS
    raise InvariantError(f"category must be 1, 2 or 3, got {category}")


@dataclass
class TrialLog:
    """Column-oriented record of one trial.

    ``limits`` holds the normalisation constants ``omega_max``, ``tau_max`` and
    ``v_max``. ``plan`` is the last global plan (category 3).
    """

    category: int
    dt_log: float
    columns: dict[str, np.ndarray]
    limits: dict[str, float] = field(default_factory=dict)
    plan: np.ndarray | None = None

    def __post_init__(self):
        if self.category not in (1, 2, 3):
            raise InvariantError(f"category must be 1, 2 or 3, got {self.category}")
        if not self.dt_log > 0:
            raise InvariantError("dt_log must be > 0")
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise InvariantError("log columns have different lengths")
        t = self.columns.get("t")
        if t is not None and t.size > 1 and not np.all(np.diff(t) > 0):
            raise InvariantError("log time stamps must be strictly increasing")

    def __len__(self) -> int:
        t = self.columns.get("t")
        return 0 if t is None else int(t.size)

    def require(self, *names: str) -> list[np.ndarray]:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise InvariantError(f"log is missing column(s): {', '.join(missing)}")
        return [self.columns[n] for n in names]

    def limit(self, name: str) -> float:
        value = self.limits.get(name)
        if value is None or not value > 0:
            raise InvariantError(f"log needs a positive '{name}' limit")
        return float(value)


@dataclass(frozen=True)
class MetricReport:
    sae: dict[int, float]
    sci: dict[int, float]
    j1: float
    j2: float | None
    j3: float | None
    jt: float
    n_samples: int

    def as_rows(self) -> list[tuple[str, float]]:
        rows = []
        for nc in sorted(self.sae):
            rows.append((f"SAE_{nc}", self.sae[nc]))
        for nc in sorted(self.sci):
            rows.append((f"SCI_{nc}", self.sci[nc]))
        rows.append(("J1", self.j1))
        if self.j2 is not None:
            rows.append(("J2", self.j2))
        if self.j3 is not None:
            rows.append(("J3", self.j3))
        if self.j3 is not None:
            rows.append(("JT3", self.jt))
        elif self.j2 is not None:
            rows.append(("JT2", self.jt))
        rows.append(("N", float(self.n_samples)))
        return rows


def sae(errors) -> float:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise InvariantError("SAE needs at least one sample")
    return float(np.sum(np.abs(e)))


def sci(inputs) -> float:
    u = np.asarray(inputs, dtype=float)
    if u.size < 2:
        raise InvariantError("SCI needs at least two samples")
    return float(np.sum(np.diff(u) ** 2))


def category1_signals(log: TrialLog) -> tuple[np.ndarray, np.ndarray]:
    ref_r, ref_l, meas_r, meas_l, tau_r, tau_l = log.require(
        "omega_ref_r", "omega_ref_l", "omega_meas_r", "omega_meas_l", "tau_r", "tau_l"
    )
    omega_max = log.limit("omega_max")
    tau_max = log.limit("tau_max")
    e = (np.abs(ref_r - meas_r) + np.abs(ref_l - meas_l)) / (2.0 * omega_max)
    u = (np.abs(tau_r) + np.abs(tau_l)) / (2.0 * tau_max)
    return e, u


def category2_signals(log: TrialLog, dt: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Prediction error and velocity effort. ``dt`` defaults to the logging period."""
    if log.category < 2:
        raise InvariantError("category-2 signals need a tracking log")
    x, y, x_teb, y_teb, v, w = log.require("x", "y", "x_teb", "y_teb", "v_cmd", "omega_cmd")
    v_max = log.limit("v_max")
    omega_max = log.limit("omega_max")
    dt = log.dt_log if dt is None else dt
    if not dt > 0:
        raise InvariantError("dt must be > 0")
    e = np.hypot(x - x_teb, y - y_teb) / (v_max * dt)
    u = np.sqrt((v / v_max) ** 2 + (w / omega_max) ** 2)
    return e, u


def closest_point_on_polyline(polyline, points) -> tuple[np.ndarray, np.ndarray]:
    """Nearest point on ``polyline`` (M x 2) for each of ``points`` (K x 2).

    Returns (nearest points K x 2, distances K).
    """
    poly = np.asarray(polyline, dtype=float).reshape(-1, 2)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if poly.shape[0] == 0:
        raise InvariantError("empty plan")
    if poly.shape[0] == 1:
        nearest = np.broadcast_to(poly[0], pts.shape).copy()
        return nearest, np.hypot(*(pts - nearest).T)
    a = poly[:-1]
    d = poly[1:] - a
    den = np.einsum("ij,ij->i", d, d)
    rel = pts[:, None, :] - a[None, :, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.einsum("kij,ij->ki", rel, d) / den
    t = np.where(den > 0, np.clip(t, 0.0, 1.0), 0.0)
    cand = a[None, :, :] + t[..., None] * d[None, :, :]
    dist = np.hypot(cand[..., 0] - pts[:, None, 0], cand[..., 1] - pts[:, None, 1])
    idx = np.argmin(dist, axis=1)
    rows = np.arange(pts.shape[0])
    return cand[rows, idx], dist[rows, idx]


def category3_error(log: TrialLog) -> np.ndarray:
    """Distance from the robot to the plan at every sample.

    Uses the logged nearest plan points when present, otherwise projects onto
    ``log.plan``.
    """
    x, y = log.require("x", "y")
    if "plan_x" in log.columns and "plan_y" in log.columns:
        px, py = log.require("plan_x", "plan_y")
        if np.any(np.isnan(px)):
            raise InvariantError("log has samples without a plan")
        return np.hypot(x - px, y - py)
    if log.plan is None or len(log.plan) == 0:
        raise InvariantError("empty plan")
    _, dist = closest_point_on_polyline(log.plan, np.column_stack([x, y]))
    return dist


def composite(sae_parts: dict[int, float], sci_parts: dict[int, float], category: int, n_samples: int) -> MetricReport:
    """Assemble J1, J2, J3 and the category's total from the per-category indices."""
    need_sae = {1: (1,), 2: (1, 2), 3: (1, 2, 3)}[category]
    need_sci = need_sae[:2]
    missing = [f"SAE_{k}" for k in need_sae if k not in sae_parts]
    missing += [f"SCI_{k}" for k in need_sci if k not in sci_parts]
    if missing:
        raise InvariantError(f"missing metric parts: {', '.join(missing)}")
    j1 = sae_parts[1] + sci_parts[1]
    j2 = sae_parts[2] + sci_parts[2] if category >= 2 else None
    j3 = sae_parts[3] if category == 3 else None
    if category == 1:
        jt = j1
    elif category == 2:
        jt = (j1 + j2) / 2.0
    else:
        jt = (j1 + j2 + j3) / 3.0
    return MetricReport(
        sae={k: sae_parts[k] for k in need_sae},
        sci={k: sci_parts[k] for k in need_sci},
        j1=j1,
        j2=j2,
        j3=j3,
        jt=jt,
        n_samples=n_samples,
    )


def evaluate(log: TrialLog) -> MetricReport:
    """All indices relevant to the log's category."""
    e1, u1 = category1_signals(log)
    sae_parts, sci_parts = {1: sae(e1)}, {1: sci(u1)}
    if log.category >= 2:
        e2, u2 = category2_signals(log)
        sae_parts[2], sci_parts[2] = sae(e2), sci(u2)
    if log.category == 3:
        sae_parts[3] = sae(category3_error(log))
    return composite(sae_parts, sci_parts, log.category, len(log))
