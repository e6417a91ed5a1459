"""Brute-force references: fine-step ray marching and dense viewpoint heatmaps.

Neither routine shares code with the fast paths it validates.  The marcher
never solves for a chord; the heatmap scores coverage by exact binary
visibility instead of the GP estimate.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coverage import CoverageField
from .metric import ViewEvaluator
from .world import OccupancyGrid


def march_ray(origin, u, d_max, spheres, c_r, step, return_index=False):
    """Walk the ray in steps of ``step``; return the first contact distance or None.

    A step counts as a contact when any point of the segment between two
    consecutive samples lies within ``c_r`` of a sphere centre.  The reported
    distance is the far sample if it lies inside a sphere, otherwise the
    closest-approach point on the segment (grazing contact).  The reported
    distance therefore lags the true entry by at most one step.
    """
    p = np.asarray(origin, dtype=float)
    u = np.asarray(u, dtype=float)
    Z = np.asarray(spheres, dtype=float).reshape(-1, p.size)
    radii = np.broadcast_to(np.asarray(c_r, dtype=float), (len(Z),))
    if len(Z) and step > radii.min() / 4.0 + 1e-15:
        raise ValueError("step must not exceed c_r / 4")
    miss = (None, -1) if return_index else None
    if len(Z) == 0 or d_max <= 0:
        return miss
    t = np.arange(0.0, d_max, step)
    t = np.append(t, d_max) if t[-1] < d_max else t
    a = t[:-1]
    length = np.diff(t)
    rel = Z - p  # (N, d)
    proj = rel @ u  # along-ray coordinate of each centre
    # per segment, the parameter of closest approach to each centre
    s = np.clip(proj[None, :] - a[:, None], 0.0, length[:, None])  # (K, N)
    along = a[:, None] + s
    perp2 = np.einsum("ij,ij->i", rel, rel) - proj**2
    d2 = np.maximum(perp2, 0.0)[None, :] + (along - proj[None, :]) ** 2
    contact = d2 < (radii**2)[None, :]
    rows = np.flatnonzero(contact.any(axis=1))
    if rows.size == 0:
        return miss
    k = rows[0]
    far = t[k + 1]
    far_d2 = np.maximum(perp2, 0.0) + (far - proj) ** 2
    inside = far_d2 < radii**2
    if inside.any():
        dist = float(far)
        idx = int(np.flatnonzero(inside)[np.argmin(far_d2[inside] - radii[inside] ** 2)])
    else:
        cands = np.flatnonzero(contact[k])
        j = cands[np.argmin(along[k, cands])]
        dist, idx = float(along[k, j]), int(j)
    return (dist, idx) if return_index else dist


@dataclass
class Heatmap:
    positions: np.ndarray  # (F, n_d) feasible grid positions
    scores: np.ndarray  # (F,) G at each position
    grid_shape: tuple  # lattice points per axis, feasible or not
    argmax: np.ndarray
    argmax_score: float

    @property
    def lattice_size(self) -> int:
        return int(np.prod(self.grid_shape))

    def table(self) -> str:
        """CSV text with header ``x,y[,z],G``."""
        cols = "xyz"[: self.positions.shape[1]]
        buf = io.StringIO()
        buf.write(",".join(cols) + ",G\n")
        for p, g in zip(self.positions, self.scores):
            buf.write(",".join(f"{v:.6f}" for v in p) + f",{g:.9g}\n")
        return buf.getvalue()


def lattice(lower, upper, step):
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if not step > 0:
        raise ValueError("grid step must be positive")
    counts = np.floor((upper - lower) / step + 1e-9).astype(int) + 1
    axes = [lower[i] + np.arange(counts[i]) * step for i in range(lower.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh]), tuple(int(c) for c in counts)


def heatmap_oracle(scenario, field: CoverageField | None = None, step: float = 1.0, grid: OccupancyGrid | None = None,
                   threads: int = 1) -> Heatmap:
    """Exact-visibility G at every feasible lattice point of the workspace.

    ``grid`` defaults to the scenario's map with all true obstacles known.
    Ties in the argmax go to the first lattice point in C order.
    """
    field = CoverageField.fresh(scenario.target) if field is None else field
    grid = scenario.known_grid() if grid is None else grid
    ev = ViewEvaluator(grid, scenario.target, field, scenario.camera, scenario.utility, scenario.gp,
                       scenario.inflation, exact=True, cap=scenario.gp_cap)
    pts, shape = lattice(scenario.workspace.lower, scenario.workspace.upper, step)
    pts = pts[ev.feasible(pts)]
    if threads > 1 and len(pts) > 1:
        chunks = np.array_split(np.arange(len(pts)), threads)
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda c: ev.score(pts[c]), chunks))
        G = np.concatenate(parts)
    else:
        G = ev.score(pts)
    if len(pts) == 0:
        return Heatmap(pts, G, shape, np.full(scenario.ndim, np.nan), -np.inf)
    k = int(np.argmax(G))
    return Heatmap(pts, G, shape, pts[k].copy(), float(G[k]))
