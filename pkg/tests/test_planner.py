import math

import numpy as np
import pytest

from fluxlab.planner import (OccupancyGrid, UnreachableError, astar_cells,
                             grid_path_cost, path_length, plan_global)
from fluxlab.scenes import Scene, gen_scene

from oracles import dijkstra_grid_cost


def empty_scene(size=12.0):
    return Scene("empty", (0.0, 0.0, size, size))


def test_straight_path_in_empty_world():
    sc = empty_scene()
    pts = plan_global(sc, (2.0, 6.0), (7.0, 6.0), 0.3)
    assert pts[0] == (2.0, 6.0)
    assert pts[-1] == (7.0, 6.0)
    assert path_length(pts) == pytest.approx(5.0, abs=1e-9)


def test_goal_inside_obstacle_unreachable():
    sc = empty_scene()
    sc.circles.append((6.0, 6.0, 0.8))
    with pytest.raises(UnreachableError):
        plan_global(sc, (2.0, 6.0), (6.0, 6.0), 0.3)


def test_wall_with_gap_routes_through_and_matches_dijkstra():
    sc = empty_scene()
    sc.rects = [(5.5, 0.0, 6.0, 5.0), (5.5, 6.5, 6.0, 12.0)]  # gap at y ~ 5.75
    grid = OccupancyGrid(sc, 0.3)
    start, goal = (2.0, 2.0), (10.0, 2.0)
    cells, cost = astar_cells(grid, grid.cell_of(start), grid.cell_of(goal))
    want = dijkstra_grid_cost(grid.blocked, grid.cell_of(start), grid.cell_of(goal))
    assert cost == pytest.approx(want, abs=1e-9)
    pts = plan_global(sc, start, goal, 0.3)
    ys = [p[1] for p in pts]
    assert max(ys) > 4.5  # detours via the gap
    assert path_length(pts) <= 1.2 * cost * grid.cell + 1e-9


def test_astar_equals_dijkstra_on_random_scenes():
    done = 0
    seed = 0
    while done < 100:
        seed += 1
        sc = gen_scene(seed, size=10.0)
        grid = OccupancyGrid(sc, 0.3)
        rng = np.random.default_rng(seed)
        free = np.argwhere(~grid.blocked)
        a, b = free[rng.integers(len(free))], free[rng.integers(len(free))]
        want = dijkstra_grid_cost(grid.blocked, tuple(a), tuple(b))
        if math.isinf(want):
            with pytest.raises(UnreachableError):
                astar_cells(grid, tuple(a), tuple(b))
        else:
            _, cost = astar_cells(grid, tuple(a), tuple(b))
            assert cost == pytest.approx(want, abs=1e-9)
        done += 1


def test_smoothing_never_lengthens_and_stays_clear():
    sc = gen_scene(17, size=10.0)
    grid = OccupancyGrid(sc, 0.3)
    start, goal = (1.0, 1.0), (9.0, 9.0)
    raw = plan_global(sc, start, goal, 0.3, smooth=False)
    smooth = plan_global(sc, start, goal, 0.3, smooth=True)
    assert path_length(smooth) <= path_length(raw) + 1e-9
    for i in range(len(smooth) - 1):
        assert grid.segment_free(smooth[i], smooth[i + 1])


def test_grid_path_cost_units():
    sc = empty_scene()
    c = grid_path_cost(sc, (2.0, 6.0), (6.0, 6.0), 0.3)
    assert c == pytest.approx(4.0, abs=0.3)  # meters, straight line
