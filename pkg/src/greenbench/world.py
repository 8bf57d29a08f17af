"""Greenhouse world: terrain sectors, slope field, obstacles and rasterization.

Coordinates are metres with x to the right and y up. The world is immutable
once loaded; scenario variants (payload, disturbance flags) are derived with
:meth:`World.with_scenario`.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from . import config as cfg
from .errors import ConfigError, InvariantError, OutOfBoundsError

MAX_PAYLOAD = 70.0
MAX_SLOPE_DEG = 4.0
DEFAULT_ROBOT_RADIUS = 0.4

Point = tuple[float, float]


@dataclass(frozen=True)
class TerrainSector:
    id: int
    mu: float
    crr: float
    cd: float
    polygon: tuple[Point, ...]
    name: str = ""

    def __post_init__(self):
        if self.id not in (1, 2, 3):
            raise InvariantError(f"sector id must be 1, 2 or 3, got {self.id}")
        if not self.mu > 0:
            raise InvariantError(f"sector {self.id}: mu must be > 0")
        if self.crr < 0 or self.cd < 0:
            raise InvariantError(f"sector {self.id}: crr and cd must be >= 0")
        if len(self.polygon) < 3 or abs(_polygon_area(self.polygon)) <= 0.0:
            raise InvariantError(f"sector {self.id}: degenerate polygon")

    def covers(self, x: float, y: float) -> bool:
        """Point-in-polygon test that counts the boundary as inside."""
        return _point_in_polygon(x, y, self.polygon)


@dataclass(frozen=True)
class TerrainSample:
    """Ground properties under a point. ``phi_deg`` is the slope in degrees."""

    s: int
    mu: float
    crr: float
    cd: float
    phi_deg: float = 0.0


@dataclass(frozen=True)
class SlopeField:
    """Grade profile along a straight axis.

    The grade at a point is a piecewise-linear function of the signed
    distance travelled from ``origin`` along ``heading``; outside the knot
    range the end values are held.
    """

    enabled: bool = False
    origin: Point = (0.0, 0.0)
    heading: float = 0.0
    knots: tuple[tuple[float, float], ...] = ((0.0, 0.0),)

    def __post_init__(self):
        if not self.knots:
            raise InvariantError("slope profile needs at least one knot")
        s = [k[0] for k in self.knots]
        if any(b <= a for a, b in zip(s, s[1:])):
            raise InvariantError("slope profile distances must be strictly increasing")
        if any(abs(k[1]) > MAX_SLOPE_DEG for k in self.knots):
            raise InvariantError(f"slope profile exceeds +/-{MAX_SLOPE_DEG} deg")
        object.__setattr__(self, "_s", tuple(s))
        object.__setattr__(self, "_phi", tuple(k[1] for k in self.knots))
        object.__setattr__(self, "_axis", (math.cos(self.heading), math.sin(self.heading)))

    def grade_deg(self, x: float, y: float) -> float:
        if not self.enabled:
            return 0.0
        ax, ay = self._axis
        dist = (x - self.origin[0]) * ax + (y - self.origin[1]) * ay
        s, phi = self._s, self._phi
        if dist <= s[0]:
            return phi[0]
        if dist >= s[-1]:
            return phi[-1]
        i = bisect.bisect_right(s, dist) - 1
        w = (dist - s[i]) / (s[i + 1] - s[i])
        return phi[i] + w * (phi[i + 1] - phi[i])

    def pitch_deg(self, x: float, y: float, theta: float) -> float:
        """Slope felt by a robot heading ``theta``: grade projected on the heading."""
        if not self.enabled:
            return 0.0
        return self.grade_deg(x, y) * math.cos(theta - self.heading)


@dataclass(frozen=True)
class Disc:
    id: int
    center: Point
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvariantError(f"obstacle {self.id}: radius must be > 0")

    def distance(self, x: float, y: float) -> float:
        """Signed distance to the surface (negative inside)."""
        return math.hypot(x - self.center[0], y - self.center[1]) - self.radius

    def nearest_core(self, x: float, y: float) -> tuple[Point, float]:
        return self.center, self.radius


@dataclass(frozen=True)
class Segment:
    """Wall: a segment swept by a disc of diameter ``thickness``."""

    id: int
    a: Point
    b: Point
    thickness: float

    def __post_init__(self):
        if not self.thickness > 0:
            raise InvariantError(f"obstacle {self.id}: thickness must be > 0")

    def _closest(self, x: float, y: float) -> Point:
        ax, ay = self.a
        dx, dy = self.b[0] - ax, self.b[1] - ay
        den = dx * dx + dy * dy
        t = 0.0 if den == 0.0 else min(1.0, max(0.0, ((x - ax) * dx + (y - ay) * dy) / den))
        return ax + t * dx, ay + t * dy

    def distance(self, x: float, y: float) -> float:
        cx, cy = self._closest(x, y)
        return math.hypot(x - cx, y - cy) - 0.5 * self.thickness

    def nearest_core(self, x: float, y: float) -> tuple[Point, float]:
        """Closest centreline point and half thickness, i.e. a local disc proxy."""
        return self._closest(x, y), 0.5 * self.thickness


Obstacle = Disc | Segment


@dataclass(frozen=True)
class World:
    bounds: tuple[float, float, float, float]
    layout_sectors: tuple[TerrainSector, ...]
    slope: SlopeField = field(default_factory=SlopeField)
    obstacles: tuple[Obstacle, ...] = ()
    payload_mass: float = 0.0
    terrain_change_enabled: bool = True
    uniform_sector: int = 2

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise InvariantError("world bounds must have positive extent")
        if not 0.0 <= self.payload_mass <= MAX_PAYLOAD:
            raise InvariantError(
                f"payload must lie in [0, {MAX_PAYLOAD:g}] kg, got {self.payload_mass:g}"
            )
        ids = [s.id for s in self.layout_sectors]
        if len(set(ids)) != len(ids):
            raise InvariantError("duplicate sector ids")
        if not self.layout_sectors:
            raise InvariantError("at least one terrain sector is required")
        ordered = tuple(sorted(self.layout_sectors, key=lambda s: s.id))
        object.__setattr__(self, "layout_sectors", ordered)
        if self.terrain_change_enabled:
            active = ordered
        else:
            base = next((s for s in ordered if s.id == self.uniform_sector), None)
            if base is None:
                raise InvariantError(f"uniform_sector {self.uniform_sector} is not defined")
            rect = ((xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax))
            active = (replace(base, polygon=rect),)
        object.__setattr__(self, "sectors", active)

    def with_scenario(
        self,
        *,
        payload: float | None = None,
        terrain_change: bool | None = None,
        slope: bool | None = None,
    ) -> World:
        """Copy of the world with the disturbance flags replaced."""
        return replace(
            self,
            payload_mass=self.payload_mass if payload is None else float(payload),
            terrain_change_enabled=(
                self.terrain_change_enabled if terrain_change is None else terrain_change
            ),
            slope=self.slope if slope is None else replace(self.slope, enabled=slope),
        )

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax


def sector_at(world: World, position: Sequence[float]) -> TerrainSample:
    """Terrain under ``position``. Boundary points resolve to the lowest sector id."""
    x, y = float(position[0]), float(position[1])
    if not world.contains(x, y):
        raise OutOfBoundsError(f"position ({x:g}, {y:g}) is outside the world bounds")
    for sector in world.sectors:
        if sector.covers(x, y):
            return TerrainSample(
                sector.id, sector.mu, sector.crr, sector.cd, world.slope.grade_deg(x, y)
            )
    raise OutOfBoundsError(f"no terrain sector covers ({x:g}, {y:g})")


def obstacle_clearance(world: World, position: Sequence[float]) -> tuple[float, int | None]:
    """Distance from ``position`` to the nearest obstacle surface and that obstacle's id.

    The distance is signed: it becomes negative inside an obstacle. With no
    obstacles the result is ``(inf, None)``.
    """
    x, y = float(position[0]), float(position[1])
    best, best_id = math.inf, None
    for obstacle in world.obstacles:
        d = obstacle.distance(x, y)
        if d < best:
            best, best_id = d, obstacle.id
    return best, best_id


# -- occupancy grid -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Row-major occupancy; row 0 is the lowest-y row, column 0 the lowest-x column."""

    resolution: float
    width: int
    height: int
    cells: np.ndarray
    origin: Point = (0.0, 0.0)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        if cells.shape != (self.height, self.width):
            raise InvariantError(
                f"cells shape {cells.shape} does not match {self.height}x{self.width}"
            )
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.width == other.width
            and self.height == other.height
            and self.origin == other.origin
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None

    def in_grid(self, cell: tuple[int, int]) -> bool:
        col, row = cell
        return 0 <= col < self.width and 0 <= row < self.height

    def occupied(self, cell: tuple[int, int]) -> bool:
        return bool(self.cells[cell[1], cell[0]])

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        col = int(math.floor((x - self.origin[0]) / self.resolution))
        row = int(math.floor((y - self.origin[1]) / self.resolution))
        return min(max(col, 0), self.width - 1), min(max(row, 0), self.height - 1)

    def cell_center(self, cell: tuple[int, int]) -> Point:
        return (
            self.origin[0] + (cell[0] + 0.5) * self.resolution,
            self.origin[1] + (cell[1] + 0.5) * self.resolution,
        )

    def to_text(self) -> str:
        lines = [f"{self.width} {self.height} {self.resolution:g}"]
        for row in self.cells:
            lines.append("".join("1" if c else "0" for c in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, origin: Point = (0.0, 0.0)) -> OccupancyGrid:
        lines = text.splitlines()
        if not lines:
            raise ConfigError("empty occupancy grid", line=1)
        head = lines[0].split()
        if len(head) != 3:
            raise ConfigError("header must be 'width height resolution'", line=1)
        try:
            width, height, resolution = int(head[0]), int(head[1]), float(head[2])
        except ValueError as exc:
            raise ConfigError(f"bad header: {exc}", line=1) from exc
        body = lines[1 : 1 + height]
        if len(body) != height:
            raise ConfigError(f"expected {height} rows, found {len(body)}", line=len(lines))
        cells = np.zeros((height, width), dtype=bool)
        for r, line in enumerate(body):
            if len(line) != width or set(line) - {"0", "1"}:
                raise ConfigError(f"row must be {width} characters of 0/1", line=r + 2)
            cells[r] = [c == "1" for c in line]
        return cls(resolution, width, height, cells, origin)


def rasterize(
    world: World, resolution: float, inflation: float = DEFAULT_ROBOT_RADIUS
) -> OccupancyGrid:
    """Mark every cell whose square intersects an obstacle grown by ``inflation``."""
    if not resolution > 0:
        raise InvariantError("resolution must be > 0")
    if inflation < 0:
        raise InvariantError("inflation must be >= 0")
    xmin, ymin, xmax, ymax = world.bounds
    if resolution > xmax - xmin or resolution > ymax - ymin:
        raise InvariantError("resolution is larger than the world bounds")
    width = int(math.ceil((xmax - xmin) / resolution - 1e-9))
    height = int(math.ceil((ymax - ymin) / resolution - 1e-9))
    cells = np.zeros((height, width), dtype=bool)
    half = 0.5 * resolution
    for obstacle in world.obstacles:
        if isinstance(obstacle, Disc):
            reach = obstacle.radius + inflation
            lo = (obstacle.center[0] - reach, obstacle.center[1] - reach)
            hi = (obstacle.center[0] + reach, obstacle.center[1] + reach)
        else:
            reach = 0.5 * obstacle.thickness + inflation
            lo = (min(obstacle.a[0], obstacle.b[0]) - reach, min(obstacle.a[1], obstacle.b[1]) - reach)
            hi = (max(obstacle.a[0], obstacle.b[0]) + reach, max(obstacle.a[1], obstacle.b[1]) + reach)
        c0 = max(int(math.floor((lo[0] - xmin) / resolution)) - 1, 0)
        c1 = min(int(math.floor((hi[0] - xmin) / resolution)) + 1, width - 1)
        r0 = max(int(math.floor((lo[1] - ymin) / resolution)) - 1, 0)
        r1 = min(int(math.floor((hi[1] - ymin) / resolution)) + 1, height - 1)
        if c0 > c1 or r0 > r1:
            continue
        cx = xmin + (np.arange(c0, c1 + 1) + 0.5) * resolution
        cy = ymin + (np.arange(r0, r1 + 1) + 0.5) * resolution
        gx, gy = np.meshgrid(cx, cy)
        if isinstance(obstacle, Disc):
            dist = _box_distance(obstacle.center[0], obstacle.center[1], gx, gy, half)
        else:
            dist = _segment_box_distance(obstacle.a, obstacle.b, gx, gy, half)
        cells[r0 : r1 + 1, c0 : c1 + 1] |= dist <= reach + 1e-12
    return OccupancyGrid(resolution, width, height, cells, (xmin, ymin))


def _box_distance(px, py, cx, cy, half):
    dx = np.maximum(np.abs(px - cx) - half, 0.0)
    dy = np.maximum(np.abs(py - cy) - half, 0.0)
    return np.hypot(dx, dy)


def _segment_box_distance(a, b, cx, cy, half, iterations=64):
    # distance from the box to a point on the segment is convex in the segment
    # parameter, so a golden-section search per cell finds the minimum
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    lo = np.zeros_like(cx)
    hi = np.ones_like(cx)
    g = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(iterations):
        m1 = hi - g * (hi - lo)
        m2 = lo + g * (hi - lo)
        f1 = _box_distance(ax + m1 * dx, ay + m1 * dy, cx, cy, half)
        f2 = _box_distance(ax + m2 * dx, ay + m2 * dy, cx, cy, half)
        left = f1 <= f2
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
    t = 0.5 * (lo + hi)
    best = _box_distance(ax + t * dx, ay + t * dy, cx, cy, half)
    best = np.minimum(best, _box_distance(ax, ay, cx, cy, half))
    return np.minimum(best, _box_distance(b[0], b[1], cx, cy, half))


# -- loading ------------------------------------------------------------------


def default_world_text() -> str:
    return resources.files("greenbench.data").joinpath("greenhouse.yaml").read_text()


def default_world() -> World:
    return load_world(default_world_text(), source="greenhouse.yaml")


def load_world(config_text: str, source: str | None = None) -> World:
    """Build a :class:`World` from YAML text.

    Raises ConfigError for syntax or type problems and InvariantError when the
    values are well-formed but violate a world invariant.
    """
    data = cfg.parse_text(config_text, source)
    try:
        return _build_world(data)
    except ConfigError as exc:
        if exc.source is None and source is not None:
            raise ConfigError(str(exc), source=source) from exc
        raise


def _build_world(data: dict) -> World:
    bounds = tuple(cfg.get_floats(data.get("bounds", [0.0, 0.0, 20.0, 20.0]), "bounds", 4))
    payload = cfg.get_float(data, "payload", 0.0)
    if not 0.0 <= payload <= MAX_PAYLOAD:
        raise InvariantError(f"payload must lie in [0, {MAX_PAYLOAD:g}] kg, got {payload:g}")
    terrain_change = cfg.get_bool(data, "terrain_change", True)
    uniform = cfg.get_int(data, "uniform_sector", 2)

    raw_sectors = data.get("sectors")
    if not isinstance(raw_sectors, list) or not raw_sectors:
        raise ConfigError("expected a non-empty list of sectors", field="sectors")
    sectors = []
    for i, item in enumerate(raw_sectors):
        f = f"sectors[{i}]"
        if not isinstance(item, dict):
            raise ConfigError("expected a mapping", field=f)
        sectors.append(
            TerrainSector(
                id=cfg.get_int(item, "id", field=f),
                mu=cfg.get_float(item, "mu", field=f),
                crr=cfg.get_float(item, "crr", field=f),
                cd=cfg.get_float(item, "cd", field=f),
                polygon=tuple(cfg.get_points(item.get("polygon"), f"{f}.polygon", 3)),
                name=str(item.get("name", "")),
            )
        )
    _check_partition(sectors, bounds)

    slope = _build_slope(data.get("slope", {}))
    obstacles = _build_obstacles(data.get("plant_rows"), data.get("obstacles", []))
    return World(
        bounds=bounds,
        layout_sectors=tuple(sectors),
        slope=slope,
        obstacles=tuple(obstacles),
        payload_mass=payload,
        terrain_change_enabled=terrain_change,
        uniform_sector=uniform,
    )


def _build_slope(raw) -> SlopeField:
    if not isinstance(raw, dict):
        raise ConfigError("expected a mapping", field="slope")
    knots = cfg.get_points(raw.get("profile", [[0.0, 0.0]]), "slope.profile")
    return SlopeField(
        enabled=cfg.get_bool(raw, "enabled", False, field="slope"),
        origin=cfg.get_point(raw.get("origin", [0.0, 0.0]), "slope.origin"),
        heading=cfg.get_float(raw, "heading", 0.0, field="slope"),
        knots=tuple(knots),
    )


def _build_obstacles(rows, raw) -> list:
    obstacles: list = []
    if rows is not None:
        if not isinstance(rows, dict):
            raise ConfigError("expected a mapping", field="plant_rows")
        xs = cfg.get_floats(rows.get("xs", []), "plant_rows.xs")
        y0, y1 = cfg.get_floats(rows.get("y_range"), "plant_rows.y_range", 2)
        spacing = cfg.get_float(rows, "spacing", 0.5, field="plant_rows")
        radius = cfg.get_float(rows, "stem_radius", 0.15, field="plant_rows")
        if not spacing > 0:
            raise ConfigError("spacing must be > 0", field="plant_rows.spacing")
        count = int(math.floor((y1 - y0) / spacing + 1e-9)) + 1
        for x in xs:
            for k in range(count):
                obstacles.append(Disc(len(obstacles) + 1, (x, y0 + k * spacing), radius))
    if not isinstance(raw, list):
        raise ConfigError("expected a list", field="obstacles")
    for i, item in enumerate(raw):
        f = f"obstacles[{i}]"
        if isinstance(item, dict) and "disc" in item and isinstance(item["disc"], dict):
            d = item["disc"]
            obstacles.append(
                Disc(
                    len(obstacles) + 1,
                    cfg.get_point(d.get("center"), f"{f}.disc.center"),
                    cfg.get_float(d, "radius", field=f"{f}.disc"),
                )
            )
        elif isinstance(item, dict) and "segment" in item and isinstance(item["segment"], dict):
            s = item["segment"]
            obstacles.append(
                Segment(
                    len(obstacles) + 1,
                    cfg.get_point(s.get("a"), f"{f}.segment.a"),
                    cfg.get_point(s.get("b"), f"{f}.segment.b"),
                    cfg.get_float(s, "thickness", field=f"{f}.segment"),
                )
            )
        else:
            raise ConfigError("expected {disc: ...} or {segment: ...}", field=f)
    return obstacles


def _check_partition(sectors: Iterable[TerrainSector], bounds) -> None:
    from shapely.geometry import Polygon, box
    from shapely.ops import unary_union

    polys = [(s.id, Polygon(s.polygon)) for s in sectors]
    for sid, poly in polys:
        if not poly.is_valid:
            raise InvariantError(f"sector {sid}: polygon is self-intersecting")
    for i, (ia, pa) in enumerate(polys):
        for ib, pb in polys[i + 1 :]:
            if pa.intersection(pb).area > 1e-9:
                raise InvariantError(f"sectors {ia} and {ib} overlap")
    world_box = box(*bounds)
    uncovered = world_box.difference(unary_union([p for _, p in polys])).area
    if uncovered > 1e-9:
        raise InvariantError(f"sectors leave {uncovered:.3g} m^2 of the world uncovered")


# -- geometry helpers ---------------------------------------------------------


def _polygon_area(poly: Sequence[Point]) -> float:
    total = 0.0
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return 0.5 * total


def _point_in_polygon(x: float, y: float, poly: Sequence[Point]) -> bool:
    n = len(poly)
    inside = False
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        # on-edge check first so boundaries count as covered
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        if (
            abs(cross) <= 1e-12
            and min(x1, x2) - 1e-12 <= x <= max(x1, x2) + 1e-12
            and min(y1, y2) - 1e-12 <= y <= max(y1, y2) + 1e-12
        ):
            return True
        if (y1 > y) != (y2 > y):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xint:
                inside = not inside
    return inside
