import math

import numpy as np
import pytest

from nbvphoto.errors import ScenarioError
from nbvphoto.scenario import BUNDLED, load_scenario


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_load(name):
    sc = load_scenario(name)
    assert sc.name == name
    assert sc.workspace.contains(sc.start)[0]
    assert not any(b.contains(sc.start)[0] for b in sc.obstacles)
    assert sc.ndim in (2, 3)


def test_defaults_filled(free_space):
    assert free_space.camera.fov == (math.pi / 2,)
    assert free_space.camera.max_range == 25.0
    assert free_space.utility.beta == 0.8
    assert free_space.gp.sigma_l == pytest.approx(2 * free_space.target.spacing)
    assert free_space.pso.particles == 20
    assert free_space.mission.coverage_threshold == 0.95
    assert free_space.inflation == pytest.approx(1.5 * free_space.workspace.resolution)


def test_unknown_key_names_line_and_field(tmp_path):
    f = tmp_path / "bad.yaml"
    f.write_text("workspace: {lower: [0, 0], upper: [10, 10]}\ntarget: {center: [5, 5], extents: [2, 2]}\n"
                 "bogus_key: 3\n")
    with pytest.raises(ScenarioError, match=r"line 3.*bogus_key"):
        load_scenario(f)
    f.write_text("workspace: {lower: [0, 0], upper: [10, 10]}\ntarget: {center: [5, 5], extents: [2, 2]}\n"
                 "camera:\n  fov: 1.0\n  zoom: 2\n")
    with pytest.raises(ScenarioError, match=r"line 5.*camera.zoom"):
        load_scenario(f)


def test_malformed_inputs(tmp_path):
    f = tmp_path / "bad.yaml"
    f.write_text("workspace: [oops\n")
    with pytest.raises(ScenarioError, match="line"):
        load_scenario(f)
    f.write_text("workspace: {lower: [0, 0], upper: [10, 10]}\ntarget: {center: [5, 5], extents: [2, 2]}\n"
                 "start: [50, 50]\n")
    with pytest.raises(ScenarioError, match="start"):
        load_scenario(f)
    with pytest.raises(ScenarioError, match="bundled"):
        load_scenario("no_such_scenario")


def test_minimal_file(tmp_path):
    f = tmp_path / "mini.yaml"
    f.write_text("workspace: {lower: [0, 0], upper: [40, 40]}\ntarget: {center: [20, 30], extents: [6, 4]}\n"
                 "obstacles:\n  - {center: [20, 15], half_extents: [2, 1]}\n")
    sc = load_scenario(f)
    assert sc.name == "mini" and len(sc.obstacles) == 1
    assert sc.camera.eval_counts == (61,)


def test_seed_override_keeps_geometry(one_obstacle_2d):
    other = one_obstacle_2d.with_seed(99)
    assert other.seed == 99 and other.pso.seed == 99
    np.testing.assert_array_equal(other.target.coords, one_obstacle_2d.target.coords)
    assert other.obstacles == one_obstacle_2d.obstacles
    np.testing.assert_array_equal(other.start, one_obstacle_2d.start)


def test_known_obstacles_in_believed_grid(one_obstacle_2d, free_space):
    g = one_obstacle_2d.believed_grid()
    assert g.blocked().sum() > free_space.believed_grid().blocked().sum()
    ob = one_obstacle_2d.obstacles[0]
    assert g.blocked()[tuple(one_obstacle_2d.workspace.cell_of(ob.center)[0])]
