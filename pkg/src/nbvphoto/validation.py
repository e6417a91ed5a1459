"""Property suites shared by the CLI ``validate`` command and the test-suite.

Each suite returns a list of :class:`Check` records; a suite passes when all
of its checks do.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .coverage import CoverageField, GPModel, posterior_mean
from .metric import Q_D, UtilityParams, ViewEvaluator, logistic_utility, scale_utility
from .oracle import heatmap_oracle, march_ray
from .optimizer import optimize_viewpoint
from .raycast import Pose, cast_ray, generate_ray_bundle
from .world import cast_world


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    info: bool = False  # reported, not part of the verdict

    def line(self) -> str:
        tag = "INFO" if self.info else ("PASS" if self.passed else "FAIL")
        return f"[{tag}] {self.name}: {self.detail}"


def random_ray_config(rng, with_hit_bias=True):
    """Random (origin, direction, spheres, c_r, d_max) with the origin outside every sphere.

    Half of the directions are aimed near a random sphere so that hits, grazes
    and occlusions are all well represented.
    """
    d = int(rng.integers(2, 4))
    n = int(rng.integers(1, 40))
    c_r = float(rng.uniform(0.2, 2.0))
    Z = rng.uniform(-15, 15, (n, d))
    o = rng.uniform(-15, 15, d)
    while np.min(np.linalg.norm(Z - o, axis=1)) <= c_r:
        o = rng.uniform(-15, 15, d)
    if with_hit_bias and rng.random() < 0.5:
        aim = Z[rng.integers(n)] + rng.normal(scale=c_r, size=d)
        u = aim - o
    else:
        u = rng.normal(size=d)
    u = u / np.linalg.norm(u)
    return o, u, Z, c_r, float(rng.uniform(5, 30))


def suite_raycast(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    disagree, worst, hits = 0, 0.0, 0
    for _ in range(n):
        o, u, Z, c_r, d_max = random_ray_config(rng)
        fast = cast_ray(o, u, d_max, Z, c_r)
        ref = march_ray(o, u, d_max, Z, c_r, c_r / 10.0)
        if fast.struck != (ref is not None):
            disagree += 1
        elif ref is not None:
            hits += 1
            worst = max(worst, abs(ref - fast.distance) / c_r)
    dt = time.perf_counter() - t0
    return [
        Check("ray oracle hit/miss agreement", disagree == 0, f"{n - disagree}/{n} agree ({hits} hits)"),
        Check("ray oracle terminal distance", worst <= 0.2, f"max error {worst:.4f} c_r (limit 0.2 c_r)"),
        Check("ray oracle runtime", dt < 10.0, f"{dt:.2f} s (limit 10 s)"),
    ]


def gp_fidelity(scenario, position, rays=64):
    """RMSE between the GP posterior from a sparse bundle and dense binary visibility."""
    target = scenario.target
    pose = Pose.look_at(np.asarray(position, float), target.coords.mean(axis=0))
    sparse = generate_ray_bundle(pose, scenario.camera.fov, (rays,) * (scenario.ndim - 1))
    hits = cast_world(scenario, pose.position, sparse.directions, scenario.camera.max_range)
    mu = posterior_mean(target.coords, hits.terminals, hits.targets.astype(float), scenario.gp, scenario.gp_cap)
    dense = generate_ray_bundle(pose, scenario.camera.fov, scenario.camera.capture_counts)
    dres = cast_world(scenario, pose.position, dense.directions, scenario.camera.max_range)
    truth = np.zeros(target.m)
    truth[np.unique(dres.indices[dres.targets])] = 1.0
    return float(np.sqrt(np.mean((mu - truth) ** 2))), mu, truth


def posterior_identity_error(seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.arange(12) * 1.5, rng.uniform(-0.2, 0.2, 12)])
    Y = (rng.random(12) > 0.5).astype(float)
    mu = posterior_mean(X, X, Y, GPModel(1.0, 1.0, 0.0), clamp=False)
    return float(np.abs(mu - Y).max())


# heatmap-oracle argmax on a fresh field; the test-suite re-derives it
GP_FIDELITY_POSE = ("free_space_2d", (50.0, 30.0))
GP_INFO_POSE = ("one_obstacle_2d", (57.0, 37.0))


def suite_gp():
    from .scenario import load_scenario

    name, pose = GP_FIDELITY_POSE
    rmse, _, _ = gp_fidelity(load_scenario(name), pose)
    out = [Check(f"GP fidelity, 64 rays, {name} at {list(pose)}", rmse <= 0.15,
                 f"RMSE {rmse:.4f} vs dense binary truth (limit 0.15)")]
    name, pose = GP_INFO_POSE
    rmse, _, _ = gp_fidelity(load_scenario(name), pose)
    out.append(Check(f"GP fidelity, 64 rays, {name} at {list(pose)}", True, f"RMSE {rmse:.4f}", info=True))
    err = posterior_identity_error()
    out.append(Check("GP posterior identity", err <= 1e-8, f"max |mu* - Y| = {err:.2e} (limit 1e-8)"))
    return out


def pso_errors(scenario, seeds=20):
    """L2 distances between swarm results and the dense-heatmap argmax, one per seed."""
    field = CoverageField.fresh(scenario.target)
    grid = scenario.known_grid()
    ref = heatmap_oracle(scenario, field, 1.0, grid)
    ev = ViewEvaluator(grid, scenario.target, field, scenario.camera, scenario.utility, scenario.gp,
                       scenario.inflation, cap=scenario.gp_cap)
    out = []
    for s in range(seeds):
        best, _, _ = optimize_viewpoint(ev, scenario.workspace.lo, scenario.workspace.hi, scenario.pso,
                                        np.random.default_rng(s))
        out.append(float(np.linalg.norm(best - ref.argmax)))
    return np.array(out), ref


def suite_pso_error(scenario=None, seeds=20):
    from .scenario import load_scenario

    sc = load_scenario("one_obstacle_2d") if scenario is None else scenario
    t0 = time.perf_counter()
    errs, ref = pso_errors(sc, seeds)
    dt = time.perf_counter() - t0
    return [
        Check("PSO vs oracle error", errs.mean() <= 2.0,
              f"{errs.mean():.4f} +/- {errs.std():.4f} m over {seeds} seeds, oracle argmax "
              f"{ref.argmax.tolist()} (limit mean 2.0 m)"),
        Check("PSO vs oracle runtime", dt < 120.0, f"{dt:.1f} s (limit 120 s)"),
    ]


UTILITY_SPOTS = [
    ("U_d(0.75)", lambda: logistic_utility(0.75, Q_D), 0.65),
    ("U_d(0)", lambda: logistic_utility(0.0, Q_D), 0.99999979),
    ("U_d(1)", lambda: logistic_utility(1.0, Q_D), 0.30466),
    ("U_s(beta)", lambda: scale_utility(0.8, UtilityParams()), 0.99753),
    ("U_s(1)", lambda: scale_utility(1.0, UtilityParams()), 0.5),
    ("U_s(0)", lambda: scale_utility(0.0, UtilityParams()), 4.54e-5),
]


def suite_utility():
    out = []
    for name, fn, want in UTILITY_SPOTS:
        got = float(fn())
        out.append(Check(f"utility spot value {name}", abs(got - want) <= 1e-6, f"{got:.8g} vs {want} (tol 1e-6)"))
    return out


SUITES = {"raycast": suite_raycast, "gp": suite_gp, "pso-error": suite_pso_error, "utility": suite_utility}


def random_mission_scenario(seed):
    """A small randomized 2D mission: one box target and 1-5 unknown box obstacles.

    Obstacles keep a 2 m gap to the target and to the start so every
    instance starts collision-free; nothing else is guaranteed (a target face
    may end up hard or impossible to see).
    """
    from .scenario import scenario_from_dict

    rng = np.random.default_rng(seed)
    size = 60.0
    ext = [float(rng.uniform(8, 16)), float(rng.uniform(4, 8))]
    center = [float(rng.uniform(22, 38)), float(rng.uniform(28, 40))]
    face = ["-x", "+x", "-y", "+y"][int(rng.integers(4))]
    t_lo = np.array(center) - np.array(ext) / 2 - 2.0
    t_hi = np.array(center) + np.array(ext) / 2 + 2.0
    while True:
        start = rng.uniform(3, size - 3, 2)
        if not np.all((start >= t_lo - 3) & (start <= t_hi + 3)):
            break
    boxes = []
    n_boxes = int(rng.integers(1, 6))
    while len(boxes) < n_boxes:
        c = rng.uniform(4, size - 4, 2)
        h = rng.uniform(0.5, 4.0, 2)
        if np.all((c + h >= t_lo) & (c - h <= t_hi)):
            continue
        if np.all(np.abs(start - c) <= h + 2.0):
            continue
        boxes.append({"center": c.round(3).tolist(), "half_extents": h.round(3).tolist()})
    doc = {
        "name": f"random_{seed}", "seed": int(seed),
        "workspace": {"lower": [0, 0], "upper": [size, size], "resolution": 1.0},
        "target": {"center": center, "extents": ext, "spacing": 0.5, "faces": [face]},
        "obstacles": boxes, "start": start.round(3).tolist(),
        "sensor": {"fov": "pi/2", "max_range": 20, "counts": 41},
        "camera": {"fov": "pi/2", "beta": 0.8, "eval_counts": 41, "capture_counts": 361},
        "pso": {"particles": 12, "iterations": 25},
        "mission": {"warm_iterations": 8, "max_photos": 6, "max_ticks": 400, "step": 2.0},
    }
    return scenario_from_dict(doc, name=doc["name"])
