"""Target discretization and GP-interpolated capture belief."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .errors import NumericalError
from .raycast import CastResult

log = logging.getLogger(__name__)

FACE_NAMES = ("-x", "+x", "-y", "+y", "-z", "+z")
DEFAULT_CAP = 1500


def _centered(extent, spacing):
    n = max(int(math.ceil(extent / spacing - 1e-9)), 1) + 1
    k = np.arange(n) - (n - 1) / 2.0
    return k * (extent / (n - 1))


@dataclass
class TargetModel:
    """Surface samples of a box target.

    ``coords`` (the GP's X) holds samples on faces of interest; ``body`` holds
    the remaining surface samples.  Both occlude rays, only ``coords`` count
    as target hits.
    """

    coords: np.ndarray
    body: np.ndarray
    spacing: float
    center: np.ndarray
    extents: np.ndarray
    faces: tuple
    c_r: float = field(default=0.0)

    def __post_init__(self):
        if len(self.coords) < 1:
            raise ValueError("target needs at least one coordinate")
        if not self.c_r:
            self.c_r = 0.5 * self.spacing
        self.spheres = np.vstack([self.coords, self.body.reshape(-1, self.ndim)])
        self.sphere_is_target = np.zeros(len(self.spheres), dtype=bool)
        self.sphere_is_target[: len(self.coords)] = True

    @property
    def m(self) -> int:
        return len(self.coords)

    @property
    def ndim(self) -> int:
        return self.coords.shape[1]

    @property
    def lower(self):
        return self.center - self.extents / 2.0

    @property
    def upper(self):
        return self.center + self.extents / 2.0

    @classmethod
    def from_box(cls, center, extents, spacing, faces=None, c_r=None) -> "TargetModel":
        center = np.asarray(center, dtype=float)
        extents = np.asarray(extents, dtype=float)
        nd = center.size
        all_faces = FACE_NAMES[: 2 * nd]
        faces = tuple(all_faces if faces in (None, "all") else faces)
        for f in faces:
            if f not in all_faces:
                raise ValueError(f"unknown face {f!r} for a {nd}D target")
        samples = {}
        for f in all_faces:
            ax = "xyz".index(f[1])
            others = [i for i in range(nd) if i != ax]
            grids = np.meshgrid(*[_centered(extents[i], spacing) for i in others], indexing="ij")
            pts = np.zeros((grids[0].size, nd))
            for i, g in zip(others, grids):
                pts[:, i] = g.ravel()
            pts[:, ax] = (1.0 if f[0] == "+" else -1.0) * extents[ax] / 2.0
            samples[f] = pts + center
        seen = set()
        interest, body = [], []
        for group, names in ((interest, faces), (body, [f for f in all_faces if f not in faces])):
            for f in names:
                for p in samples[f]:
                    key = tuple(np.round(p, 9))
                    if key not in seen:
                        seen.add(key)
                        group.append(p)
        body_arr = np.array(body).reshape(-1, nd)
        return cls(np.array(interest), body_arr, float(spacing), center, extents, faces, c_r or 0.0)


@dataclass(frozen=True)
class GPModel:
    sigma_f: float = 1.0
    sigma_l: float = 1.0
    sigma_n: float = 0.1

    def __post_init__(self):
        if self.sigma_f <= 0 or self.sigma_l <= 0 or self.sigma_n < 0:
            raise ValueError("GP scales must be positive")


def rbf_kernel(A, B, gp: GPModel) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError("coordinate dimensions differ")
    d2 = cdist(A, B, "sqeuclidean")
    return gp.sigma_f**2 * np.exp(-d2 / (2.0 * gp.sigma_l**2))


def _subsample(n, cap):
    if n <= cap:
        return slice(None)
    return np.linspace(0, n - 1, cap).round().astype(int)


def _solve(K, y):
    try:
        c = cho_factor(K, lower=True, check_finite=False)
    except LinAlgError as exc:
        cond = float(np.linalg.cond(K))
        raise NumericalError(f"kernel matrix not positive definite (condition number {cond:.3e})", cond) from exc
    return cho_solve(c, y, check_finite=False), c


def posterior_mean(X, Xs, Ys, gp: GPModel, cap=DEFAULT_CAP, clamp=True) -> np.ndarray:
    """k(X, Xs) [k(Xs, Xs) + sigma_n^2 I]^-1 Ys, clamped to [0, 1]."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xs = np.asarray(Xs, dtype=float).reshape(-1, X.shape[1])
    Ys = np.asarray(Ys, dtype=float).ravel()
    if len(Xs) != len(Ys):
        raise ValueError("sample coordinates and labels differ in length")
    if len(Xs) == 0:
        return np.zeros(len(X))
    sel = _subsample(len(Xs), cap)
    Xs, Ys = Xs[sel], Ys[sel]
    K = rbf_kernel(Xs, Xs, gp)
    K[np.diag_indices_from(K)] += gp.sigma_n**2
    alpha, _ = _solve(K, Ys)
    mu = rbf_kernel(X, Xs, gp) @ alpha
    return np.clip(mu, 0.0, 1.0) if clamp else mu


def negative_log_likelihood(Xs, Ys, gp: GPModel) -> float:
    Xs = np.asarray(Xs, dtype=float)
    Ys = np.asarray(Ys, dtype=float).ravel()
    K = rbf_kernel(Xs, Xs, gp)
    K[np.diag_indices_from(K)] += gp.sigma_n**2
    alpha, (L, _) = _solve(K, Ys)
    return float(0.5 * Ys @ alpha + np.log(np.diag(L)).sum() + 0.5 * len(Ys) * math.log(2 * math.pi))


def tune_hyperparameters(Xs, Ys, grid, sigma_n=0.1) -> GPModel:
    """Grid search over (sigma_f, sigma_l) minimizing the Gaussian NLL."""
    if len(Xs) < 2:
        raise ValueError("need at least two samples to tune")
    best, best_nll = None, np.inf
    for sf, sl in grid:
        gp = GPModel(float(sf), float(sl), sigma_n)
        try:
            nll = negative_log_likelihood(Xs, Ys, gp)
        except NumericalError as exc:
            log.warning("skipping singular candidate sigma_f=%g sigma_l=%g: %s", sf, sl, exc)
            continue
        if nll < best_nll:
            best, best_nll = gp, nll
    if best is None:
        raise NumericalError("every hyperparameter candidate was singular")
    return best


@dataclass
class CoverageField:
    """Per-coordinate capture belief plus every label committed so far."""

    mu: np.ndarray
    samples_x: np.ndarray
    samples_y: np.ndarray

    @classmethod
    def fresh(cls, target: TargetModel) -> "CoverageField":
        return cls(np.zeros(target.m), np.zeros((0, target.ndim)), np.zeros(0))

    def copy(self) -> "CoverageField":
        return CoverageField(self.mu.copy(), self.samples_x.copy(), self.samples_y.copy())

    def mean(self) -> float:
        return float(self.mu.mean())


def _near_target(points, target: TargetModel, gp: GPModel):
    # samples further than 4 length scales from the target's box carry
    # kernel weight below e^-8 on every target coordinate
    margin = 4.0 * gp.sigma_l
    return np.all((points >= target.lower - margin) & (points <= target.upper + margin), axis=1)


def expected_gain(field: CoverageField, hits, gp: GPModel, target: TargetModel, cap=DEFAULT_CAP) -> float:
    """Expected number of newly captured coordinates from one candidate view.

    The candidate's own samples give mu*; the gain is sum(max(0, mu* - mu)).
    """
    res = hits if isinstance(hits, CastResult) else CastResult.from_hits(hits)
    if len(res) == 0 or not np.any(res.targets):
        return 0.0
    keep = _near_target(res.terminals, target, gp)
    mu_star = posterior_mean(target.coords, res.terminals[keep], res.targets[keep].astype(float), gp, cap)
    return float(np.maximum(mu_star - field.mu, 0.0).sum())


def commit_capture(field: CoverageField, hits, gp: GPModel, target: TargetModel, cap=DEFAULT_CAP) -> CoverageField:
    """Append a photo's labels and raise mu to the full posterior where higher."""
    res = hits if isinstance(hits, CastResult) else CastResult.from_hits(hits)
    keep = _near_target(res.terminals, target, gp)
    xs = np.vstack([field.samples_x, res.terminals[keep]])
    ys = np.concatenate([field.samples_y, res.targets[keep].astype(float)])
    mu_full = posterior_mean(target.coords, xs, ys, gp, cap)
    mu = np.clip(np.maximum(field.mu, mu_full), 0.0, 1.0)
    return CoverageField(mu, xs, ys)


def coverage_table(field: CoverageField, target: TargetModel) -> str:
    cols = ["x", "y", "z"][: target.ndim] + ["mu"]
    lines = [",".join(cols)]
    for p, m in zip(target.coords, field.mu):
        lines.append(",".join(f"{v:.6f}" for v in (*p, m)))
    return "\n".join(lines) + "\n"
