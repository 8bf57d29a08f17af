"""Global planner: Lazy Theta* on an occupancy grid.

Nodes are cell centres. Moving from cell ``a`` to cell ``b`` costs

    c(a, b) = w_euc * |a - b| * res + w_traversal * res * sum(field[k] for k in cells(a, b) \\ {a})

where ``cells(a, b)`` is the supercover of the segment (every cell it touches,
both cells at an exact corner crossing) and ``field`` is the traversal
penalty. Line of sight holds when no supercover cell is occupied.

Lazy Theta* assumes line of sight when relaxing a neighbour through the
current node's parent and only checks it when that neighbour is expanded; if
the check fails the parent is reset to the best already-closed grid neighbour.
A neighbour is also relaxed through the plain grid step from the current node,
and the cheaper of the two candidates is kept.
The search loop is compiled with numba.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.ndimage import distance_transform_edt

from .errors import InvariantError, NoPathError
from .world import OccupancyGrid

PENALTY_RADIUS = 3.0

_D8 = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=np.int64)


@dataclass(frozen=True)
class PlannerConfig:
    how_many_corners: int = 8
    w_euc: float = 1.0
    w_traversal: float = 2.0
    n_max: int = 200_000
    traversal_mode: str = "obstacle"
    snap_radius: float = 0.5

    def __post_init__(self):
        if self.how_many_corners not in (4, 8):
            raise InvariantError("how_many_corners must be 4 or 8")
        if self.w_euc < 0 or self.w_traversal < 0:
            raise InvariantError("planner weights must be >= 0")
        if self.n_max < 1:
            raise InvariantError("n_max must be >= 1")
        if self.traversal_mode not in ("obstacle", "goal"):
            raise InvariantError("traversal_mode must be 'obstacle' or 'goal'")


@dataclass(frozen=True, eq=False)
class Path:
    """Planned polyline in world coordinates plus the grid cells it was built from."""

    nodes: np.ndarray
    cells: tuple[tuple[int, int], ...]
    cost: float
    expansions: int = 0
    popped_f: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.cells)


# -- line kernels --------------------------------------------------------------


@njit(cache=True)
def _walk(occ, field, c0, r0, c1, r1):
    # supercover walk from (c0, r0) to (c1, r1) in cell-index space; returns
    # (any cell occupied, sum of field over the cells after the first one)
    dx = c1 - c0
    dy = r1 - r0
    nx = abs(dx)
    ny = abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    x = c0
    y = r0
    ix = 0
    iy = 0
    blocked = occ[y, x]
    total = 0.0
    while ix < nx or iy < ny:
        dec = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if dec == 0:
            blocked = blocked or occ[y, x + sx] or occ[y + sy, x]
            total += field[y, x + sx] + field[y + sy, x]
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif dec < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        blocked = blocked or occ[y, x]
        total += field[y, x]
    return blocked, total


@njit(cache=True)
def _los(occ, c0, r0, c1, r1):
    dx = c1 - c0
    dy = r1 - r0
    nx = abs(dx)
    ny = abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    x = c0
    y = r0
    ix = 0
    iy = 0
    if occ[y, x]:
        return False
    while ix < nx or iy < ny:
        dec = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if dec == 0:
            if occ[y, x + sx] or occ[y + sy, x]:
                return False
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif dec < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        if occ[y, x]:
            return False
    return True


@njit(cache=True)
def _edge_cost(occ, field, a, b, height, res, w_euc, w_trav):
    ca = a // height
    ra = a % height
    cb = b // height
    rb = b % height
    cost = w_euc * res * math.hypot(cb - ca, rb - ra)
    if w_trav != 0.0:
        _, total = _walk(occ, field, ca, ra, cb, rb)
        cost += w_trav * res * total
    return cost


# -- open list: binary heap ordered by (f, h, cell index) ----------------------


@njit(cache=True)
def _less(hf, hh, hi, i, j):
    if hf[i] != hf[j]:
        return hf[i] < hf[j]
    if hh[i] != hh[j]:
        return hh[i] < hh[j]
    return hi[i] < hi[j]


@njit(cache=True)
def _swap(hf, hh, hi, i, j):
    hf[i], hf[j] = hf[j], hf[i]
    hh[i], hh[j] = hh[j], hh[i]
    hi[i], hi[j] = hi[j], hi[i]


@njit(cache=True)
def _push(hf, hh, hi, size, f, h, idx):
    k = size
    hf[k] = f
    hh[k] = h
    hi[k] = idx
    while k > 0:
        p = (k - 1) // 2
        if _less(hf, hh, hi, k, p):
            _swap(hf, hh, hi, k, p)
            k = p
        else:
            break
    return size + 1


@njit(cache=True)
def _pop(hf, hh, hi, size):
    f = hf[0]
    h = hh[0]
    idx = hi[0]
    size -= 1
    if size > 0:
        hf[0] = hf[size]
        hh[0] = hh[size]
        hi[0] = hi[size]
        k = 0
        while True:
            left = 2 * k + 1
            right = left + 1
            m = k
            if left < size and _less(hf, hh, hi, left, m):
                m = left
            if right < size and _less(hf, hh, hi, right, m):
                m = right
            if m == k:
                break
            _swap(hf, hh, hi, k, m)
            k = m
    return f, h, idx, size


@njit(cache=True)
def _lazy_theta(occ, field, start, goal, res, w_euc, w_trav, offsets, n_max):
    height, width = occ.shape
    n = width * height
    g = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)  # 0 new, 1 open, 2 closed
    cap = 8 * n + 8
    hf = np.empty(cap)
    hh = np.empty(cap)
    hi = np.empty(cap, dtype=np.int64)
    popped = np.empty(min(n_max, n) + 1)
    gc = goal // height
    gr = goal % height

    g[start] = 0.0
    parent[start] = start
    status[start] = 1
    h0 = res * math.hypot(start // height - gc, start % height - gr)
    size = _push(hf, hh, hi, 0, h0, h0, start)
    expanded = 0
    while size > 0:
        f, h, s, size = _pop(hf, hh, hi, size)
        if status[s] == 2:
            continue
        sc = s // height
        sr = s % height
        p = parent[s]
        if p != s and not _los(occ, p // height, p % height, sc, sr):
            # parent not visible: fall back to the best closed grid neighbour
            best = np.inf
            best_p = -1
            for k in range(offsets.shape[0]):
                nc = sc + offsets[k, 0]
                nr = sr + offsets[k, 1]
                if nc < 0 or nr < 0 or nc >= width or nr >= height:
                    continue
                q = nc * height + nr
                if status[q] != 2 or not _los(occ, nc, nr, sc, sr):
                    continue
                cand = g[q] + _edge_cost(occ, field, q, s, height, res, w_euc, w_trav)
                if cand < best:
                    best = cand
                    best_p = q
            g[s] = best
            parent[s] = best_p
        popped[expanded] = f
        expanded += 1
        if s == goal:
            return 0, g, parent, popped[:expanded]
        if expanded >= n_max:
            return 2, g, parent, popped[:expanded]
        status[s] = 2
        p = parent[s]
        for k in range(offsets.shape[0]):
            nc = sc + offsets[k, 0]
            nr = sr + offsets[k, 1]
            if nc < 0 or nr < 0 or nc >= width or nr >= height:
                continue
            q = nc * height + nr
            if status[q] == 2 or occ[nr, nc]:
                continue
            if not _los(occ, sc, sr, nc, nr):
                continue
            if status[q] == 0:
                status[q] = 1
            # shortcut through the parent (line of sight checked lazily) or
            # the plain grid step, whichever is cheaper; with a traversal
            # penalty the shortcut can cost more than the step
            cand = g[p] + _edge_cost(occ, field, p, q, height, res, w_euc, w_trav)
            via = p
            if p != s:
                step = g[s] + _edge_cost(occ, field, s, q, height, res, w_euc, w_trav)
                # ties (collinear moves) keep the shortcut
                if step < cand - 1e-12 * (1.0 + cand):
                    cand = step
                    via = s
            if cand < g[q]:
                g[q] = cand
                parent[q] = via
                hq = res * math.hypot(nc - gc, nr - gr)
                size = _push(hf, hh, hi, size, cand + hq, hq, q)
    return 1, g, parent, popped[:expanded]


# -- public API ------------------------------------------------------------------


def traversal_field(grid: OccupancyGrid, config: PlannerConfig, goal: tuple[int, int] | None = None) -> np.ndarray:
    """Per-cell traversal penalty (before weighting)."""
    occ = grid.cells
    if config.traversal_mode == "goal":
        if goal is None:
            raise InvariantError("goal-distance traversal needs the goal cell")
        rows, cols = np.indices(occ.shape)
        dist = np.hypot(cols - goal[0], rows - goal[1])
        return dist / max(dist.max(), 1.0)
    if not occ.any():
        return np.zeros(occ.shape)
    dist = distance_transform_edt(~occ)
    return np.maximum(PENALTY_RADIUS - dist, 0.0)


def supercover(a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """Cells touched by the segment between two cell centres, in walk order."""
    (x, y), (c1, r1) = a, b
    dx, dy = c1 - x, r1 - y
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    cells = [(x, y)]
    ix = iy = 0
    while ix < nx or iy < ny:
        dec = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if dec == 0:
            cells += [(x + sx, y), (x, y + sy)]
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif dec < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return cells


def line_of_sight(grid: OccupancyGrid, a: tuple[int, int], b: tuple[int, int]) -> bool:
    if not (grid.in_grid(a) and grid.in_grid(b)):
        raise InvariantError("line-of-sight endpoints must lie inside the grid")
    return bool(_los(grid.cells, int(a[0]), int(a[1]), int(b[0]), int(b[1])))


def heuristic(n: tuple[int, int], goal: tuple[int, int], resolution: float) -> float:
    return resolution * math.hypot(n[0] - goal[0], n[1] - goal[1])


def edge_cost(
    grid: OccupancyGrid,
    field: np.ndarray,
    a: tuple[int, int],
    b: tuple[int, int],
    config: PlannerConfig,
) -> float:
    h = grid.height
    return float(
        _edge_cost(
            grid.cells,
            field,
            a[0] * h + a[1],
            b[0] * h + b[1],
            h,
            grid.resolution,
            config.w_euc,
            config.w_traversal,
        )
    )


def lazy_theta_star(
    grid: OccupancyGrid,
    start: tuple[int, int],
    goal: tuple[int, int],
    config: PlannerConfig | None = None,
    field: np.ndarray | None = None,
) -> Path:
    """Any-angle path between two free cells. Raises NoPathError on failure."""
    config = config or PlannerConfig()
    for name, cell in (("start", start), ("goal", goal)):
        if not grid.in_grid(cell):
            raise NoPathError(f"{name} cell {cell} is outside the grid")
        if grid.occupied(cell):
            raise NoPathError(f"{name} cell {cell} is occupied")
    if field is None:
        field = traversal_field(grid, config, goal)
    h = grid.height
    s_idx = start[0] * h + start[1]
    g_idx = goal[0] * h + goal[1]
    offsets = _D8 if config.how_many_corners == 8 else _D8[:4]
    status, g, parent, popped = _lazy_theta(
        grid.cells,
        np.ascontiguousarray(field, dtype=float),
        s_idx,
        g_idx,
        float(grid.resolution),
        float(config.w_euc),
        float(config.w_traversal),
        offsets,
        int(config.n_max),
    )
    if status == 2:
        raise NoPathError(f"node expansion cap n_max={config.n_max} reached")
    if status == 1:
        raise NoPathError(f"goal {goal} is unreachable from {start}")
    chain = [g_idx]
    while chain[-1] != s_idx:
        chain.append(int(parent[chain[-1]]))
        if len(chain) > grid.width * grid.height:
            raise InvariantError("parent chain does not terminate")
    chain.reverse()
    cells = tuple((i // h, i % h) for i in chain)
    nodes = np.array([grid.cell_center(c) for c in cells])
    return Path(nodes, cells, float(g[g_idx]), int(popped.size), popped)


def snap_to_free(grid: OccupancyGrid, point, radius: float = 0.5) -> tuple[int, int]:
    """Free cell whose centre is closest to ``point`` within ``radius``."""
    x, y = float(point[0]), float(point[1])
    res = grid.resolution
    cc = (x - grid.origin[0]) / res - 0.5
    cr = (y - grid.origin[1]) / res - 0.5
    k = int(math.ceil(radius / res)) + 1
    c0, c1 = max(int(math.floor(cc)) - k, 0), min(int(math.ceil(cc)) + k, grid.width - 1)
    r0, r1 = max(int(math.floor(cr)) - k, 0), min(int(math.ceil(cr)) + k, grid.height - 1)
    best, best_cell = math.inf, None
    for col in range(c0, c1 + 1):
        for row in range(r0, r1 + 1):
            if grid.cells[row, col]:
                continue
            px, py = grid.cell_center((col, row))
            d = math.hypot(px - x, py - y)
            if d <= radius + 1e-12 and d < best:
                best, best_cell = d, (col, row)
    if best_cell is None:
        raise NoPathError(f"no free cell within {radius:g} m of ({x:g}, {y:g})")
    return best_cell


def plan_path(grid: OccupancyGrid, start_xy, goal_xy, config: PlannerConfig | None = None, field=None) -> Path:
    """Snap world points to free cells and run Lazy Theta* between them."""
    config = config or PlannerConfig()
    start = snap_to_free(grid, start_xy, config.snap_radius)
    goal = snap_to_free(grid, goal_xy, config.snap_radius)
    return lazy_theta_star(grid, start, goal, config, field)


def replan(pose, goal_xy, grid: OccupancyGrid, config: PlannerConfig | None = None, field=None) -> Path:
    """Plan from the current pose; identical inputs give an identical path."""
    return plan_path(grid, pose[:2], goal_xy, config, field)


class Replanner:
    """Baseline global planner: replans toward a fixed goal every ``period`` seconds."""

    def __init__(self, grid: OccupancyGrid, config: PlannerConfig | None = None, period: float = 2.0):
        if not period > 0:
            raise InvariantError("replanning period must be > 0")
        self.grid = grid
        self.config = config or PlannerConfig()
        self.period = period
        self._field = None
        self._field_goal = None
        self._cache: dict = {}
        self.last_time: float | None = None
        self.path: Path | None = None

    def plan(self, grid: OccupancyGrid, start_xy, goal_xy) -> Path:
        goal = snap_to_free(grid, goal_xy, self.config.snap_radius)
        if self._field is None or self._field_goal != goal or grid is not self.grid:
            self.grid = grid
            self._field = traversal_field(grid, self.config, goal)
            self._field_goal = goal
            self._cache = {}
        start = snap_to_free(grid, start_xy, self.config.snap_radius)
        key = (start, goal)
        if key not in self._cache:
            self._cache[key] = lazy_theta_star(grid, start, goal, self.config, self._field)
        return self._cache[key]

    def update(self, t: float, pose, goal_xy) -> tuple[Path, bool]:
        """Return the current plan and whether it was recomputed at time ``t``."""
        if self.path is not None and t - self.last_time < self.period - 1e-9:
            return self.path, False
        self.path = self.plan(self.grid, pose, goal_xy)
        self.last_time = t
        return self.path, True
