import math

import numpy as np
import pytest
from scipy.sparse import lil_matrix
from scipy.sparse.csgraph import dijkstra

from nbvphoto.errors import NoPathError
from nbvphoto.planner import (
    Path,
    astar_cells,
    grid_free_masks,
    path_is_safe,
    plan_grid_astar,
    plan_path,
    plan_rrt_star,
)
from nbvphoto.world import CollisionChecker, OccupancyGrid, Workspace


def test_straight_corridor():
    g = OccupancyGrid(Workspace((-1, -5), (12, 5), 1.0))
    p = plan_grid_astar(g, (0, 0), (10, 0), 0.5)
    assert abs(p.length - 10.0) <= 1.0
    np.testing.assert_allclose(p.start, [0, 0])
    np.testing.assert_allclose(p.goal, [10, 0])


def test_full_wall_no_path():
    g = OccupancyGrid(Workspace((0, 0), (20, 20), 1.0))
    g.cells[10, :] = 3.5
    with pytest.raises(NoPathError):
        plan_grid_astar(g, (3, 10), (17, 10), 0.5)


def test_wall_with_gap():
    g = OccupancyGrid(Workspace((0, 0), (20, 20), 1.0))
    g.cells[10, :] = 3.5
    g.cells[10, 15] = 0.0
    p = plan_grid_astar(g, (3.5, 5.5), (17.5, 5.5), 0.3)
    assert p.length > 14.0
    chk = CollisionChecker(g, 0.3)
    assert path_is_safe(chk, p)
    # the route crosses x=10..11 only through the gap row
    crossing = [w for a, b in zip(p.waypoints[:-1], p.waypoints[1:]) for w in np.linspace(a, b, 200)
                if 10.0 <= w[0] <= 11.0]
    assert all(15.0 <= w[1] <= 16.0 for w in crossing)


def _dijkstra_cost(free, corner_free, s, t):
    nx, ny = free.shape
    A = lil_matrix((nx * ny, nx * ny))
    for i in range(nx):
        for j in range(ny):
            if not free[i, j]:
                continue
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    a, b = i + di, j + dj
                    if (di or dj) and 0 <= a < nx and 0 <= b < ny and free[a, b]:
                        if di and dj and not corner_free[max(i, a), max(j, b)]:
                            continue
                        A[i * ny + j, a * ny + b] = math.hypot(di, dj)
    d = dijkstra(A.tocsr(), indices=s[0] * ny + s[1])
    return d[t[0] * ny + t[1]]


def test_astar_optimal_against_dijkstra():
    rng = np.random.default_rng(0)
    for _ in range(15):
        free = rng.random((20, 20)) > 0.3
        corner_free = rng.random((21, 21)) > 0.1
        cells = np.argwhere(free)
        s, t = map(tuple, cells[rng.choice(len(cells), 2, replace=False)])
        ref = _dijkstra_cost(free, corner_free, s, t)
        if np.isinf(ref):
            with pytest.raises(NoPathError):
                astar_cells(free, corner_free, s, t)
        else:
            _, cost = astar_cells(free, corner_free, s, t)
            assert cost == pytest.approx(ref, abs=1e-9)


def test_endpoint_collision_rejected():
    g = OccupancyGrid(Workspace((0, 0), (10, 10), 1.0))
    g.cells[5, 5] = 3.5
    with pytest.raises(NoPathError):
        plan_grid_astar(g, (5.5, 5.5), (1, 1), 0.5)


def test_grid_masks_shape():
    g = OccupancyGrid(Workspace((0, 0), (6, 4), 1.0))
    free, corner = grid_free_masks(CollisionChecker(g, 0.5))
    assert free.shape == (6, 4) and corner.shape == (7, 5)


def test_rrt_start_equals_goal():
    g = OccupancyGrid(Workspace((0, 0, 0), (10, 10, 10), 1.0))
    p = plan_rrt_star(g, (5, 5, 5), (5, 5, 5), 0.5, 100, np.random.default_rng(0))
    assert len(p.waypoints) == 1 and p.length == 0.0


def test_rrt_slab_with_hole_is_safe():
    g = OccupancyGrid(Workspace((0, 0, 0), (20, 20, 20), 1.0))
    g.cells[:, 10, :] = 3.5
    g.cells[8:12, 10, 8:12] = 0.0
    chk = CollisionChecker(g, 0.5)
    for seed in range(3):
        p = plan_path(g, (10, 3, 10), (10, 17, 10), 0.5, np.random.default_rng(seed), rrt_iterations=3000)
        assert path_is_safe(chk, p)
        np.testing.assert_allclose(p.goal, [10, 17, 10])


@pytest.mark.slow
def test_rrt_empty_box_near_straight():
    g = OccupancyGrid(Workspace((0, 0, 0), (20, 20, 20), 1.0))
    start, goal = np.array([2.0, 2.0, 2.0]), np.array([18.0, 18.0, 18.0])
    straight = np.linalg.norm(goal - start)
    good = 0
    for seed in range(100):
        p = plan_rrt_star(g, start, goal, 0.5, 5000, np.random.default_rng(seed))
        good += p.length <= 1.1 * straight
    assert good >= 90


def test_path_length_property():
    assert Path(np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 5.0]])).length == pytest.approx(6.0)
