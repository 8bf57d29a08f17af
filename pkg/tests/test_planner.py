import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import astar8, sampled_los, visibility_graph_length
from greenbench.errors import InvariantError, NoPathError
from greenbench.planner import (
    PlannerConfig,
    Replanner,
    edge_cost,
    heuristic,
    lazy_theta_star,
    line_of_sight,
    plan_path,
    replan,
    supercover,
    traversal_field,
)
from greenbench.world import OccupancyGrid, rasterize

UNIFORM = PlannerConfig(w_traversal=0.0)


def grid_of(cells, resolution=1.0):
    cells = np.asarray(cells, dtype=bool)
    return OccupancyGrid(resolution, cells.shape[1], cells.shape[0], cells)


def empty(w, h, resolution=1.0):
    return grid_of(np.zeros((h, w)), resolution)


@pytest.fixture(scope="module")
def greenhouse_grid(world):
    return rasterize(world, 0.1)


# -- line of sight ---------------------------------------------------------------------


def test_los_on_empty_grid():
    g = empty(10, 10)
    assert line_of_sight(g, (0, 0), (9, 9))
    assert line_of_sight(g, (9, 0), (0, 7))


def test_los_blocked_at_midpoint():
    cells = np.zeros((10, 10), bool)
    cells[2, 4] = True
    assert not line_of_sight(grid_of(cells), (0, 2), (8, 2))


def test_los_corner_crossing_is_conservative():
    cells = np.zeros((3, 3), bool)
    cells[0, 1] = True
    assert not line_of_sight(grid_of(cells), (0, 0), (2, 2))
    assert set(supercover((0, 0), (1, 1))) == {(0, 0), (1, 0), (0, 1), (1, 1)}


def test_los_endpoints_checked():
    with pytest.raises(InvariantError):
        line_of_sight(empty(3, 3), (0, 0), (5, 0))


@settings(max_examples=300)
@given(st.integers(0, 2**31), st.integers(2, 12), st.integers(2, 12))
def test_los_matches_ray_sampling(seed, w, h):
    rng = np.random.default_rng(seed)
    occ = rng.random((h, w)) < 0.2
    a = (int(rng.integers(w)), int(rng.integers(h)))
    b = (int(rng.integers(w)), int(rng.integers(h)))
    assert line_of_sight(grid_of(occ), a, b) == sampled_los(occ, a, b)


@given(st.tuples(st.integers(-15, 15), st.integers(-15, 15)), st.tuples(st.integers(-15, 15), st.integers(-15, 15)))
def test_supercover_is_symmetric_and_connected(a, b):
    cells = supercover(a, b)
    assert cells[0] == a and cells[-1] == b
    assert set(cells) == set(supercover(b, a))
    for p, q in zip(cells, cells[1:]):
        assert max(abs(p[0] - q[0]), abs(p[1] - q[1])) == 1


# -- heuristic and cost ----------------------------------------------------------------


def test_heuristic_examples():
    assert heuristic((4, 4), (4, 4), 0.1) == 0.0
    assert heuristic((0, 0), (3, 0), 0.1) == pytest.approx(0.3)
    assert heuristic((0, 0), (3, 4), 1.0) == 5.0


def test_traversal_field_ramp():
    cells = np.zeros((1, 8), bool)
    cells[0, 0] = True
    field = traversal_field(grid_of(cells), PlannerConfig())
    assert field[0].tolist() == [3.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]


def test_edge_cost_adds_weighted_field():
    cells = np.zeros((1, 8), bool)
    cells[0, 0] = True
    g = grid_of(cells, 0.5)
    cfg = PlannerConfig(w_euc=1.0, w_traversal=2.0)
    field = traversal_field(g, cfg)
    # cells (2,0) and (3,0) are entered: penalties 1 and 0
    assert edge_cost(g, field, (1, 0), (3, 0), cfg) == pytest.approx(1.0 + 2.0 * 0.5 * 1.0)


# -- search ------------------------------------------------------------------------------


def test_start_equals_goal():
    p = lazy_theta_star(empty(5, 5), (2, 2), (2, 2), UNIFORM)
    assert p.cells == ((2, 2),) and p.cost == 0.0


def test_open_grid_is_one_segment():
    p = lazy_theta_star(empty(10, 10), (0, 0), (9, 9), UNIFORM)
    assert p.cells == ((0, 0), (9, 9))
    assert p.cost == pytest.approx(math.sqrt(162))


def test_wall_gap_close_to_visibility_graph():
    occ = np.zeros((20, 20), bool)
    occ[2:20, 10] = True
    g = grid_of(occ)
    p = lazy_theta_star(g, (2, 15), (17, 15), UNIFORM)
    oracle = visibility_graph_length(occ, (2.5, 15.5), (17.5, 15.5), 1.0)
    assert oracle <= p.cost <= 1.05 * oracle


def _random_grid(seed, w, h, density):
    rng = np.random.default_rng(seed)
    occ = rng.random((h, w)) < density
    free = np.argwhere(~occ)
    if len(free) < 2:
        return None
    i, j = rng.choice(len(free), 2, replace=False)
    return occ, (int(free[i][1]), int(free[i][0])), (int(free[j][1]), int(free[j][0]))


@settings(max_examples=150)
@given(st.integers(0, 2**31), st.integers(3, 25), st.integers(3, 25), st.floats(0.0, 0.35))
def test_search_properties_on_uniform_grids(seed, w, h, density):
    case = _random_grid(seed, w, h, density)
    if case is None:
        return
    occ, s, t = case
    g = grid_of(occ, 0.1)
    ref = astar8(occ, s, t, 0.1)
    if math.isinf(ref):
        with pytest.raises(NoPathError):
            lazy_theta_star(g, s, t, UNIFORM)
        return
    p = lazy_theta_star(g, s, t, UNIFORM)
    # any-angle dominance and the Euclidean lower bound
    assert p.cost <= ref + 1e-9
    assert p.cost >= heuristic(s, t, 0.1) - 1e-12
    # full line-of-sight re-check and g-consistency along the chain
    field = np.zeros(occ.shape)
    total = 0.0
    for a, b in zip(p.cells, p.cells[1:]):
        assert sampled_los(occ, a, b)
        total += edge_cost(g, field, a, b, UNIFORM)
    assert total == pytest.approx(p.cost, abs=1e-9)


@settings(max_examples=50)
@given(st.integers(0, 2**31), st.integers(3, 30), st.integers(3, 30))
def test_popped_f_bounded_by_start_heuristic(seed, w, h):
    rng = np.random.default_rng(seed)
    s = (int(rng.integers(w)), int(rng.integers(h)))
    t = (int(rng.integers(w)), int(rng.integers(h)))
    p = lazy_theta_star(empty(w, h, 0.1), s, t, UNIFORM)
    assert np.all(p.popped_f >= heuristic(s, t, 0.1) - 1e-9)
    assert p.popped_f[-1] == pytest.approx(p.cost, abs=1e-12)


def test_popped_f_can_drop_after_parent_shortcut():
    # the goal is first reached through the start's line of sight, after a
    # detour neighbour with larger f has been expanded
    p = lazy_theta_star(empty(3, 5, 0.1), (2, 3), (1, 1), UNIFORM)
    assert p.cells == ((2, 3), (1, 1))
    assert np.diff(p.popped_f).min() < 0


def test_g_consistency_with_traversal_penalty(greenhouse_grid):
    cfg = PlannerConfig()
    p = plan_path(greenhouse_grid, (10.1, 3.0), (18.0, 17.4), cfg)
    field = traversal_field(greenhouse_grid, cfg)
    total = sum(edge_cost(greenhouse_grid, field, a, b, cfg) for a, b in zip(p.cells, p.cells[1:]))
    assert total == pytest.approx(p.cost, abs=1e-9)


def test_default_map_plan_avoids_occupied_cells(greenhouse_grid):
    p = plan_path(greenhouse_grid, (10.1, 3.0), (18.0, 17.4))
    assert len(p) >= 2
    for a, b in zip(p.cells, p.cells[1:]):
        for cell in supercover(a, b):
            assert not greenhouse_grid.occupied(cell)
    assert math.hypot(*(p.nodes[-1] - (18.0, 17.4))) <= 0.5


def test_goal_inside_obstacle_rejected(world, greenhouse_grid):
    plant = next(ob for ob in world.obstacles if hasattr(ob, "center"))
    with pytest.raises(NoPathError):
        plan_path(greenhouse_grid, (10.1, 3.0), plant.center)


def test_unreachable_and_capped_searches():
    occ = np.zeros((5, 5), bool)
    occ[:, 2] = True
    with pytest.raises(NoPathError, match="unreachable"):
        lazy_theta_star(grid_of(occ), (0, 0), (4, 4), UNIFORM)
    with pytest.raises(NoPathError, match="n_max"):
        lazy_theta_star(empty(30, 30), (0, 0), (29, 29), PlannerConfig(n_max=1))


def test_four_connected_expansion_still_finds_paths():
    occ = np.zeros((10, 10), bool)
    occ[0:8, 5] = True
    p = lazy_theta_star(grid_of(occ), (0, 0), (9, 0), PlannerConfig(how_many_corners=4, w_traversal=0.0))
    assert p.cells[0] == (0, 0) and p.cells[-1] == (9, 0)


def test_config_validation():
    with pytest.raises(InvariantError):
        PlannerConfig(how_many_corners=6)
    with pytest.raises(InvariantError):
        PlannerConfig(w_euc=-1.0)


# -- replanning ---------------------------------------------------------------------------


def test_replan_is_deterministic(greenhouse_grid):
    a = replan((10.1, 3.0, 0.78), (18.0, 17.4), greenhouse_grid)
    b = replan((10.1, 3.0, 0.78), (18.0, 17.4), greenhouse_grid)
    assert a.cells == b.cells and a.cost == b.cost


def test_replanner_period(greenhouse_grid):
    r = Replanner(greenhouse_grid, period=2.0)
    first, fresh = r.update(0.0, (10.1, 3.0, 0.78), (18.0, 17.4))
    assert fresh
    same, fresh = r.update(1.0, (10.5, 4.0, 0.78), (18.0, 17.4))
    assert not fresh and same is first
    again, fresh = r.update(2.0, (10.1, 3.0, 0.78), (18.0, 17.4))
    assert fresh and again.cells == first.cells
    with pytest.raises(InvariantError):
        Replanner(greenhouse_grid, period=0.0)


@settings(max_examples=100)
@given(st.integers(0, 2**31), st.integers(4, 25), st.integers(4, 25), st.floats(0.02, 0.25))
def test_no_worse_than_grid_search_with_traversal_penalty(seed, w, h, density):
    case = _random_grid(seed, w, h, density)
    if case is None:
        return
    occ, s, t = case
    g = grid_of(occ, 0.1)
    cfg = PlannerConfig()
    field = traversal_field(g, cfg)
    ref = astar8(occ, s, t, 0.1, field, cfg.w_euc, cfg.w_traversal)
    if math.isinf(ref):
        return
    p = lazy_theta_star(g, s, t, cfg, field)
    assert p.cost <= ref + 1e-9
    total = sum(edge_cost(g, field, a, b, cfg) for a, b in zip(p.cells, p.cells[1:]))
    assert total == pytest.approx(p.cost, abs=1e-9)
