"""Photo-quality objective for a candidate viewpoint.

G = gamma_d * gamma_s * (expected newly captured target coordinates), where
gamma_d penalizes laterally unbalanced captures and gamma_s rewards the
target spanning a fraction ``beta`` of the field of view.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .coverage import CoverageField, GPModel, TargetModel, expected_gain
from .raycast import Pose, cast_bundle, generate_ray_bundle
from .world import CollisionChecker, OccupancyGrid

Q_D = (0.3, 0.7, 20.0, -0.75)
Q_S = (0.0, 1.0, -20.0, -0.5)
Q_S_UPPER = (0.0, 1.0, 30.0, -1.0)


@dataclass(frozen=True)
class UtilityParams:
    q_d: tuple = Q_D
    q_s: tuple = Q_S  # scale utility on [0, beta]
    q_s_upper: tuple = Q_S_UPPER  # scale utility on (beta, 1]
    beta: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        for q in (self.q_d, self.q_s, self.q_s_upper):
            if len(q) != 4:
                raise ValueError("utility parameter vectors have four entries")


@dataclass(frozen=True)
class ViewScore:
    gamma_d: float
    gamma_s: float
    coverage_sum: float

    @property
    def G(self) -> float:
        if self.coverage_sum == -np.inf:
            return -np.inf
        return self.gamma_d * self.gamma_s * self.coverage_sum

    @classmethod
    def infeasible(cls) -> "ViewScore":
        return cls(0.0, 0.0, -np.inf)


def logistic_utility(x, q):
    """q1 + q2 / (1 + exp(q3 (x + q4)))."""
    q1, q2, q3, q4 = q
    return q1 + q2 / (1.0 + np.exp(q3 * (np.asarray(x, dtype=float) + q4)))


def scale_utility(x, params: UtilityParams):
    x = np.asarray(x, dtype=float)
    return np.where(x <= params.beta, logistic_utility(x, params.q_s), logistic_utility(x, params.q_s_upper))


def distortion_factor(points, pose: Pose, q_d=Q_D) -> float:
    """Product over image axes of U_d(|l2 - l1| / (l1 + l2)).

    ``points`` are target-hit terminals; l1/l2 are the largest lateral
    offsets on either side of the optical axis.
    """
    points = np.asarray(points, dtype=float).reshape(-1, pose.ndim)
    if len(points) == 0:
        return 0.0
    offsets = (points - pose.position) @ pose.image_axes().T
    gamma = 1.0
    for k in range(offsets.shape[1]):
        l1 = max(0.0, -offsets[:, k].min())
        l2 = max(0.0, offsets[:, k].max())
        total = l1 + l2
        ratio = abs(l2 - l1) / total if total > 0 else 1.0
        gamma *= float(logistic_utility(ratio, q_d))
    return gamma


def scale_factor(angles, fov, params: UtilityParams = UtilityParams()) -> float:
    """Product over angular axes of U_s((phi_max - phi_min) / Phi)."""
    angles = np.asarray(angles, dtype=float)
    fov = np.atleast_1d(np.asarray(fov, dtype=float))
    if angles.size == 0:
        return 0.0
    angles = angles.reshape(-1, fov.size)
    frac = (angles.max(axis=0) - angles.min(axis=0)) / fov
    return float(np.prod(scale_utility(np.clip(frac, 0.0, 1.0), params)))


@dataclass(frozen=True)
class CameraParams:
    fov: tuple = (np.pi / 2,)
    eval_counts: tuple = (61,)
    capture_counts: tuple = (721,)
    max_range: float = 25.0


def interest_centroid(target: TargetModel, field: CoverageField) -> np.ndarray:
    w = np.clip(1.0 - field.mu, 0.0, 1.0)
    if w.sum() <= 1e-12:
        return target.coords.mean(axis=0)
    return (w[:, None] * target.coords).sum(axis=0) / w.sum()


class ViewEvaluator:
    """Scores candidate positions against frozen map and coverage snapshots.

    The camera always aims at the interest-weighted centroid of the target.
    With ``exact=True`` the dense capture bundle is used and the coverage term
    counts the uncaptured coordinates that actually win a ray (no GP).
    """

    def __init__(self, grid: OccupancyGrid, target: TargetModel, field: CoverageField, camera: CameraParams,
                 utility: UtilityParams, gp: GPModel, inflation: float, obstacle_radius=None, exact=False,
                 cap=1500):
        self.target = target
        self.field = field
        self.camera = camera
        self.utility = utility
        self.gp = gp
        self.exact = exact
        self.cap = cap
        self.checker = CollisionChecker(grid, inflation)
        obstacles = grid.occupied_centers()
        r_obs = 0.75 * grid.workspace.resolution if obstacle_radius is None else obstacle_radius
        self.spheres = np.vstack([target.spheres, obstacles])
        self.radii = np.concatenate([np.full(len(target.spheres), target.c_r), np.full(len(obstacles), r_obs)])
        self.is_target = np.concatenate([target.sphere_is_target, np.zeros(len(obstacles), bool)])
        self.centroid = interest_centroid(target, field)
        self.region = None  # optional extra admissibility test, points -> bool array
        self.timings: list[float] = []

    def camera_pose(self, position) -> Pose:
        return Pose.look_at(position, self.centroid)

    def feasible(self, positions) -> np.ndarray:
        P = np.atleast_2d(positions)
        ok = ~self.checker.colliding(P)
        ok &= np.linalg.norm(P - self.centroid, axis=1) > 1e-9
        if self.region is not None:
            ok &= self.region(P)
        return ok

    def cast(self, pose: Pose, counts=None):
        counts = self.camera.eval_counts if counts is None else counts
        bundle = generate_ray_bundle(pose, self.camera.fov, counts)
        res = cast_bundle(pose.position, bundle.directions, self.camera.max_range, self.spheres, self.radii,
                          self.is_target)
        return bundle, res

    def evaluate(self, position) -> ViewScore:
        t0 = time.perf_counter()
        try:
            position = np.asarray(position, dtype=float)
            if not self.feasible(position)[0]:
                return ViewScore.infeasible()
            pose = self.camera_pose(position)
            counts = self.camera.capture_counts if self.exact else self.camera.eval_counts
            bundle, res = self.cast(pose, counts)
            if not np.any(res.targets):
                return ViewScore(0.0, 0.0, 0.0)
            gamma_d = distortion_factor(res.terminals[res.targets], pose, self.utility.q_d)
            gamma_s = scale_factor(bundle.angles[res.targets], self.camera.fov, self.utility)
            if self.exact:
                seen = np.unique(res.indices[res.targets])
                gain = float(np.clip(1.0 - self.field.mu[seen], 0.0, 1.0).sum())
            else:
                gain = expected_gain(self.field, res, self.gp, self.target, self.cap)
            return ViewScore(gamma_d, gamma_s, gain)
        finally:
            self.timings.append(time.perf_counter() - t0)

    def score(self, positions) -> np.ndarray:
        P = np.atleast_2d(np.asarray(positions, dtype=float))
        return np.array([self.evaluate(p).G for p in P])


def evaluate_viewpoint(position, grid, target, field, camera, utility, gp, inflation, **kw) -> ViewScore:
    return ViewEvaluator(grid, target, field, camera, utility, gp, inflation, **kw).evaluate(position)
