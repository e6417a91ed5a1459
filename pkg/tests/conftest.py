import numpy as np
import pytest

from nbvphoto.coverage import CoverageField
from nbvphoto.oracle import heatmap_oracle
from nbvphoto.scenario import load_scenario


@pytest.fixture(scope="session")
def free_space():
    return load_scenario("free_space_2d")


@pytest.fixture(scope="session")
def one_obstacle_2d():
    return load_scenario("one_obstacle_2d")


@pytest.fixture(scope="session")
def free_space_heatmap(free_space):
    return heatmap_oracle(free_space, CoverageField.fresh(free_space.target), 1.0)


@pytest.fixture(scope="session")
def one_obstacle_heatmap(one_obstacle_2d):
    return heatmap_oracle(one_obstacle_2d, CoverageField.fresh(one_obstacle_2d.target), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mission_logs():
    """Lazily run and cache bundled missions by name."""
    from nbvphoto.mission import run_mission

    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_mission(load_scenario(name))
        return cache[name]

    return get


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def emit(number, name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
