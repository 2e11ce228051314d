import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dijkstra_cost, make_map, random_classes, uniform_map
from safenav.errors import PlanningError, UnreachableGoalError
from safenav.mapbuild import LandUse
from safenav.planner import (
    PixelPath,
    max_deviation,
    path_cost,
    plan_path,
    simplify_to_waypoints,
    step_cost,
    validate_path,
)


def test_step_costs():
    wm = make_map([[LandUse.NEUTRAL, LandUse.NEUTRAL], [LandUse.SAFE, LandUse.SAFE]])
    assert step_cost(wm, (0, 0), (1, 0)) == 20.0
    assert step_cost(wm, (0, 1), (1, 0)) == pytest.approx(math.sqrt(2) * 12.5)
    safe = make_map(np.full((2, 2), LandUse.SAFE))
    assert step_cost(safe, (0, 0), (1, 1)) == pytest.approx(7.0710678118654755)
    mixed = make_map([[LandUse.SAFE, LandUse.DANGER]])
    assert step_cost(mixed, (0, 0), (1, 0)) == 52.5
    with pytest.raises(PlanningError):
        step_cost(mixed, (0, 0), (0, 0))


def test_start_equals_goal():
    path = plan_path(uniform_map(5, 5), (2, 3), (2, 3))
    assert path.cells == [(2, 3)]
    assert path.total_cost == 0.0
    assert path_cost(uniform_map(5, 5), path) == 0.0


def test_uniform_map_straight_chain():
    wm = uniform_map(30, 20)
    path = plan_path(wm, (1, 2), (25, 10))
    # 8 diagonal and 16 axial moves at weight 20
    assert path.total_cost == pytest.approx(20 * (8 * math.sqrt(2) + 16), abs=1e-9)
    assert path.total_cost == pytest.approx(dijkstra_cost(wm.weights, (1, 2), (25, 10)), abs=1e-9)
    assert path.total_length_m == pytest.approx(8 * math.sqrt(2) + 16)


def test_wall_with_single_gap():
    classes = np.full((64, 64), LandUse.NEUTRAL, dtype=np.uint8)
    classes[32, :] = LandUse.DANGER
    classes[32, 14] = LandUse.SAFE
    wm = make_map(classes)
    path = plan_path(wm, (10, 5), (10, 60))
    assert (14, 32) in path.cells
    assert path.total_cost == pytest.approx(dijkstra_cost(wm.weights, (10, 5), (10, 60)), abs=1e-9)


def test_total_cost_is_path_cost_exactly():
    rng = np.random.default_rng(5)
    for _ in range(20):
        wm = make_map(random_classes(rng, 48))
        a, b = tuple(rng.integers(0, 48, 2)), tuple(rng.integers(0, 48, 2))
        path = plan_path(wm, a, b)
        validate_path(wm, path.cells)
        assert path.total_cost == path_cost(wm, path)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_matches_dijkstra(seed):
    rng = np.random.default_rng(seed)
    wm = make_map(random_classes(rng, 32))
    a, b = tuple(int(v) for v in rng.integers(0, 32, 2)), tuple(int(v) for v in rng.integers(0, 32, 2))
    cost = plan_path(wm, a, b).total_cost
    assert cost == pytest.approx(dijkstra_cost(wm.weights, a, b), rel=0, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_heuristic_is_admissible(seed):
    rng = np.random.default_rng(seed)
    wm = make_map(random_classes(rng, 24))
    goal = tuple(int(v) for v in rng.integers(0, 24, 2))
    for _ in range(5):
        cell = tuple(int(v) for v in rng.integers(0, 24, 2))
        h = math.hypot(cell[0] - goal[0], cell[1] - goal[1]) * wm.config.w_safe
        assert h <= dijkstra_cost(wm.weights, cell, goal) + 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_reverse_route_costs_the_same(seed):
    rng = np.random.default_rng(seed)
    wm = make_map(random_classes(rng, 32))
    a, b = tuple(int(v) for v in rng.integers(0, 32, 2)), tuple(int(v) for v in rng.integers(0, 32, 2))
    assert plan_path(wm, a, b).total_cost == pytest.approx(plan_path(wm, b, a).total_cost, abs=1e-9)


def test_raising_weights_never_lowers_cost():
    rng = np.random.default_rng(8)
    classes = random_classes(rng, 40)
    wm = make_map(classes)
    path = plan_path(wm, (0, 0), (39, 39))
    worse = classes.copy()
    worse[worse == LandUse.SAFE] = LandUse.NEUTRAL
    assert plan_path(make_map(worse), (0, 0), (39, 39)).total_cost >= path.total_cost


def test_deterministic_tie_breaking():
    wm = uniform_map(20, 20)
    assert plan_path(wm, (0, 0), (19, 7)).cells == plan_path(wm, (0, 0), (19, 7)).cells


def test_off_map_endpoint():
    with pytest.raises(PlanningError):
        plan_path(uniform_map(5, 5), (0, 0), (5, 0))


def test_unreachable_goal_with_infinite_wall():
    class Walled:
        def __init__(self):
            base = uniform_map(10, 10)
            w = base.weights.copy()
            w[5, :] = np.inf
            self.weights, self.config, self.gsd = w, base.config, 1.0

    with pytest.raises(UnreachableGoalError):
        plan_path(Walled(), (0, 0), (0, 9))


def test_path_cost_basics():
    wm = uniform_map(4, 4)
    assert path_cost(wm, [(1, 1)]) == 0
    assert path_cost(wm, [(0, 0), (1, 0)]) == 20
    with pytest.raises(PlanningError):
        path_cost(wm, [(0, 0), (2, 0)])


def test_road_crossed_roughly_perpendicularly():
    classes = np.full((80, 80), LandUse.NEUTRAL, dtype=np.uint8)
    classes[36:44, :] = LandUse.DANGER
    wm = make_map(classes)
    cells = plan_path(wm, (10, 10), (70, 70)).cells
    on_road = [i for i, (x, y) in enumerate(cells) if classes[y, x] == LandUse.DANGER]
    x0, y0 = cells[on_road[0] - 1]
    x1, y1 = cells[on_road[-1] + 1]
    # road runs east-west, so its normal is the y axis
    angle = math.degrees(math.atan2(abs(x1 - x0), abs(y1 - y0)))
    assert angle <= 30


# ---- waypoint simplification


def test_collinear_path_reduces_to_endpoints():
    cells = [(i, 3) for i in range(10)]
    for tol in (0, 0.5, 5):
        assert simplify_to_waypoints(cells, tol) == [(0, 3), (9, 3)]


def test_zero_tolerance_staircase_keeps_every_corner():
    cells = [(0, 0)]
    for k in range(5):
        x, y = cells[-1]
        cells += [(x + 1, y), (x + 1, y + 1)]
    simplified = simplify_to_waypoints(cells, 0)
    assert simplified == cells
    assert max_deviation(cells, simplified) == 0


def test_l_shape_keeps_corner():
    cells = [(i, 0) for i in range(6)] + [(5, j) for j in range(1, 6)]
    simplified = simplify_to_waypoints(cells, 1.0)
    assert simplified == [(0, 0), (5, 0), (5, 5)]
    # the first leg lies on y = 0 and the second on x = 5, so every cell sits on one of them
    for x, y in cells:
        assert min(abs(y), abs(x - 5)) < 1
    assert max_deviation(cells, simplified) < 1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), tol=st.floats(0, 6))
def test_simplification_within_tolerance(seed, tol):
    rng = np.random.default_rng(seed)
    wm = make_map(random_classes(rng, 32))
    path = plan_path(wm, (0, 0), (31, int(rng.integers(0, 32))))
    simplified = simplify_to_waypoints(path, tol)
    assert simplified[0] == path.start and simplified[-1] == path.goal
    assert max_deviation(path.cells, simplified) <= tol + 1e-12


def test_negative_tolerance():
    with pytest.raises(ValueError):
        simplify_to_waypoints(PixelPath([(0, 0)], 0, 0), -1)
