import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbvphoto.errors import CollisionError, DomainError
from nbvphoto.oracle import march_ray
from nbvphoto.raycast import CastResult, Pose, RaycastHit, generate_ray_bundle
from nbvphoto.world import (
    BoxObstacle,
    CollisionChecker,
    OccupancyGrid,
    Workspace,
    integrate_depth_scan,
    is_colliding,
    occupancy_probability,
    rasterize_boxes,
    simulate_depth_sensor,
)
from nbvphoto.coverage import TargetModel


def _scene(obstacles=(), target=None, fov=(math.pi / 2,), counts=(61,), d_max=25.0, size=60.0):
    ws = Workspace((0, 0), (size, size), 1.0)
    if target is None:
        target = TargetModel.from_box((size - 5, size - 5), (2, 2), 0.5, ["-y"])
    return SimpleNamespace(workspace=ws, obstacles=tuple(obstacles), target=target,
                           sensor=SimpleNamespace(fov=fov, counts=counts, max_range=d_max))


def test_workspace_validation():
    with pytest.raises(ValueError):
        Workspace((0, 0), (0, 10))
    with pytest.raises(ValueError):
        Workspace((0, 0), (10, 10), 0.0)
    with pytest.raises(ValueError):
        Workspace((0,), (10,))
    assert Workspace((0, 0), (100, 100), 0.1).shape == (1000, 1000)
    assert Workspace((0, 0, 0), (10, 10.5, 3), 1.0).shape == (10, 11, 3)


def test_box_obstacle_validation():
    with pytest.raises(ValueError):
        BoxObstacle((0, 0), (1, 0))


@pytest.mark.parametrize("logodds, p", [(0.0, 0.5), (3.5, 0.9706), (-2.0, 0.1192)])
def test_occupancy_probability_values(logodds, p):
    g = OccupancyGrid(Workspace((0, 0), (4, 4)))
    g.cells[1, 2] = logodds
    # reference values are given to four decimals
    assert occupancy_probability(g, (1, 2)) == pytest.approx(p, abs=1e-4)


def test_occupancy_probability_bounds():
    g = OccupancyGrid(Workspace((0, 0), (4, 4)))
    with pytest.raises(IndexError):
        occupancy_probability(g, (4, 0))
    with pytest.raises(IndexError):
        occupancy_probability(g, (-1, 0))


def _one_ray(origin, terminal, struck, target=False):
    origin, terminal = np.asarray(origin, float), np.asarray(terminal, float)
    d = float(np.linalg.norm(terminal - origin))
    return [RaycastHit(terminal, target, d, 0, struck, 0 if struck else -1)]


def test_scan_hit_marks_terminal_cell():
    g = OccupancyGrid(Workspace((0, 0), (20, 20)))
    pose = Pose((0.5, 0.5), (1.0, 0.0))
    integrate_depth_scan(g, pose, _one_ray((0.5, 0.5), (10.0, 0.5), True))
    assert g.cells[10, 0] == pytest.approx(0.85)
    # every traversed cell before the terminal is freed once
    np.testing.assert_allclose(g.cells[0:10, 0], -0.4)
    assert np.count_nonzero(g.cells) == 11


def test_scan_clamps_at_bounds():
    g = OccupancyGrid(Workspace((0, 0), (20, 20)))
    pose = Pose((0.5, 0.5), (1.0, 0.0))
    g.cells[10, 0] = 3.5
    integrate_depth_scan(g, pose, _one_ray((0.5, 0.5), (10.0, 0.5), True))
    assert g.cells[10, 0] == 3.5
    for _ in range(20):
        integrate_depth_scan(g, pose, _one_ray((0.5, 0.5), (10.0, 0.5), True))
    assert g.cells.min() == -2.0 and g.cells.max() == 3.5


def test_saturated_hits_commute():
    a = OccupancyGrid(Workspace((0, 0), (20, 20)))
    b = a.copy()
    a.cells[10, 0] = b.cells[10, 0] = 3.5
    pose = Pose((0.5, 0.5), (1.0, 0.0))
    hits = _one_ray((0.5, 0.5), (10.0, 0.5), True)
    integrate_depth_scan(a, pose, hits)
    integrate_depth_scan(a, pose, hits)
    integrate_depth_scan(b, pose, hits)
    assert a.cells[10, 0] == b.cells[10, 0] == 3.5


def test_scan_never_marks_target_or_static_cells():
    static = np.zeros((20, 20), bool)
    static[10, 0] = True
    g = OccupancyGrid(Workspace((0, 0), (20, 20)), static=static)
    pose = Pose((0.5, 0.5), (1.0, 0.0))
    integrate_depth_scan(g, pose, _one_ray((0.5, 0.5), (10.0, 0.5), True))
    assert g.cells[10, 0] == 0.0
    g2 = OccupancyGrid(Workspace((0, 0), (20, 20)))
    integrate_depth_scan(g2, pose, _one_ray((0.5, 0.5), (10.0, 0.5), True, target=True))
    assert g2.cells[10, 0] == 0.0


def test_scan_outside_workspace_is_domain_error():
    g = OccupancyGrid(Workspace((0, 0), (20, 20)))
    with pytest.raises(DomainError):
        integrate_depth_scan(g, Pose((30.0, 0.5), (1.0, 0.0)), [])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(1, 19), st.floats(1, 19), st.booleans()), min_size=1, max_size=30))
def test_logodds_stay_clamped(scans):
    g = OccupancyGrid(Workspace((0, 0), (20, 20)))
    pose = Pose((0.5, 0.5), (1.0, 0.0))
    for x, y, struck in scans:
        integrate_depth_scan(g, pose, _one_ray((0.5, 0.5), (x, y), struck))
        assert g.cells.min() >= g.l_min and g.cells.max() <= g.l_max


def test_empty_scene_all_rays_at_dmax():
    sc = _scene(target=TargetModel.from_box((100, 100), (2, 2), 0.5, ["-y"]), size=200)
    res = simulate_depth_sensor(sc, Pose((10.0, 10.0), (-1.0, 0.0)))
    np.testing.assert_allclose(res.distances, 25.0)
    assert not res.targets.any() and not res.struck.any()


def test_facing_away_all_rays_at_dmax():
    sc = _scene([BoxObstacle((40, 30), (2, 2))])
    res = simulate_depth_sensor(sc, Pose((30.0, 30.0), (-1.0, 0.0)))
    np.testing.assert_allclose(res.distances, 25.0)


def test_obstacle_on_axis_central_ray():
    # obstacle face at 5 m ahead of the sensor
    sc = _scene([BoxObstacle((35.5, 30), (0.5, 0.5))])
    res = simulate_depth_sensor(sc, Pose((30.0, 30.0), (1.0, 0.0)))
    c = len(res) // 2
    assert res.distances[c] < 5 + sc.target.c_r
    assert res.distances[c] == pytest.approx(5.0)
    assert res.struck[c] and not res.targets[c]


def test_sensor_inside_obstacle_raises():
    sc = _scene([BoxObstacle((30, 30), (2, 2))])
    with pytest.raises(CollisionError):
        simulate_depth_sensor(sc, Pose((30.0, 30.0), (1.0, 0.0)))
    with pytest.raises(DomainError):
        simulate_depth_sensor(sc, Pose((-1.0, 30.0), (1.0, 0.0)))


def _march_box(origin, u, d_max, box, step=0.01):
    # first sample inside the box, an independent stand-in for the slab test
    t = np.arange(0.0, d_max, step)
    pts = origin + t[:, None] * u
    inside = np.all((pts >= box.lower) & (pts <= box.upper), axis=1)
    return float(t[np.argmax(inside)]) if inside.any() else None


def test_sensor_soundness_against_marching_oracle():
    """No reported target hit when a true obstacle is closer along the ray."""
    from nbvphoto.world import cast_world

    target = TargetModel.from_box((30, 45), (10, 4), 0.5, ["-y"])
    box = BoxObstacle((29, 36), (2, 1))
    sc = _scene([box], target=target)
    pose = Pose.look_at((30.0, 28.0), (30.0, 43.0))
    bundle = generate_ray_bundle(pose, (math.pi / 2,), (181,))
    res = cast_world(sc, pose.position, bundle.directions, 25.0)
    blocked_rays = 0
    for i, u in enumerate(bundle.directions):
        d_box = _march_box(pose.position, u, 25.0, box)
        d_tgt = march_ray(pose.position, u, 25.0, target.coords, target.c_r, target.c_r / 10)
        if d_box is not None:
            assert res.distances[i] == pytest.approx(d_box, abs=0.011)
        if d_box is not None and d_tgt is not None and d_box < d_tgt:
            blocked_rays += 1
            assert not res.targets[i]
    assert blocked_rays > 10


def test_is_colliding_examples():
    ws = Workspace((0, 0), (10, 10), 1.0)
    g = OccupancyGrid(ws)
    assert not is_colliding(g, (4.5, 4.5), 1.5)
    g.cells[4, 4] = 3.5
    assert is_colliding(g, (4.5, 4.5), 0.0)
    # occupied cell centre 1.4 m away, inflation 1.0
    assert not is_colliding(g, (4.5 + 1.4, 4.5), 1.0)
    assert is_colliding(g, (4.5 + 0.9, 4.5), 1.0)
    g.cells[4, 4] = 0.0  # p = 0.5 exactly is not occupied
    assert not is_colliding(g, (4.5, 4.5), 0.0)


def test_collision_checker_static_mask_and_segments():
    ws = Workspace((0, 0), (10, 10), 1.0)
    static = rasterize_boxes(ws, [BoxObstacle((5, 5), (1, 1))])
    g = OccupancyGrid(ws, static=static)
    chk = CollisionChecker(g, 0.5)
    assert chk.colliding([5.0, 5.0])[0]
    assert not CollisionChecker(g, 0.5, use_static=False).colliding([5.0, 5.0])[0]
    assert not chk.segment_free((1, 5), (9, 5))
    assert chk.segment_free((1, 1), (9, 1))
    assert chk.colliding([11.0, 5.0])[0]


def test_rasterize_covers_box_area():
    ws = Workspace((0, 0), (10, 10), 1.0)
    m = rasterize_boxes(ws, [BoxObstacle((5.0, 5.0), (1.5, 0.5))])
    # box spans x 3.5..6.5, y 4.5..5.5 -> cells x 3..6, y 4..5
    assert m[3:7, 4:6].all() and m.sum() == 8


def test_cast_result_roundtrip():
    sc = _scene([BoxObstacle((40, 30), (2, 2))])
    res = simulate_depth_sensor(sc, Pose((30.0, 30.0), (1.0, 0.0)))
    back = CastResult.from_hits(res.hits())
    np.testing.assert_array_equal(back.distances, res.distances)
    np.testing.assert_array_equal(back.targets, res.targets)


def test_grid_evolution_deterministic():
    sc = _scene([BoxObstacle((40, 30), (2, 2)), BoxObstacle((35, 40), (1, 3))])
    grids = []
    for _ in range(2):
        g = OccupancyGrid(sc.workspace)
        for x in (20.0, 25.0, 30.0):
            pose = Pose((x, 30.0), (1.0, 0.0))
            integrate_depth_scan(g, pose, simulate_depth_sensor(sc, pose))
        grids.append(g.cells.tobytes())
    assert grids[0] == grids[1]
