"""Workspace, believed occupancy map and the simulated depth sensor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import CollisionError, DomainError
from .raycast import CastResult, Pose, cast_boxes, cast_bundle, generate_ray_bundle

L_HIT = 0.85
L_MISS = -0.4
L_MIN = -2.0
L_MAX = 3.5


@dataclass(frozen=True)
class Workspace:
    lower: tuple
    upper: tuple
    resolution: float = 1.0

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper) or len(lower) not in (2, 3):
            raise ValueError("workspace must be 2D or 3D")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise ValueError("workspace lower bound must be below upper bound on every axis")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "_lo", np.array(lower))
        object.__setattr__(self, "_hi", np.array(upper))

    @property
    def ndim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def shape(self) -> tuple:
        ext = (self.hi - self.lo) / self.resolution
        # guard against 100/0.1 = 1000.0000000000001
        return tuple(int(math.ceil(e - 1e-9)) for e in ext)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return ((pts >= self._lo) & (pts <= self._hi)).all(axis=1)

    def cell_of(self, points) -> np.ndarray:
        """Integer cell indices; points on the upper face map to the last cell."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.floor((pts - self.lo) / self.resolution).astype(int)
        return np.clip(idx, 0, np.array(self.shape) - 1)

    def cell_center(self, index) -> np.ndarray:
        return self.lo + (np.asarray(index, dtype=float) + 0.5) * self.resolution

    def cell_centers(self) -> np.ndarray:
        axes = [self.lower[i] + (np.arange(n) + 0.5) * self.resolution for i, n in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@dataclass(frozen=True)
class BoxObstacle:
    center: tuple
    half_extents: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "half_extents", tuple(float(v) for v in self.half_extents))
        if len(self.center) != len(self.half_extents):
            raise ValueError("center and half extents differ in dimension")
        if any(h <= 0 for h in self.half_extents):
            raise ValueError("box half extents must be positive")

    @property
    def lower(self) -> np.ndarray:
        return np.subtract(self.center, self.half_extents)

    @property
    def upper(self) -> np.ndarray:
        return np.add(self.center, self.half_extents)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)


def box_arrays(boxes):
    if not boxes:
        return np.zeros((0, 0)), np.zeros((0, 0))
    return np.array([b.lower for b in boxes]), np.array([b.upper for b in boxes])


def rasterize_boxes(workspace: Workspace, boxes) -> np.ndarray:
    """Boolean mask of cells whose area overlaps any box."""
    mask = np.zeros(workspace.shape, dtype=bool)
    res = workspace.resolution
    for b in boxes:
        lo = np.floor((b.lower - workspace.lo) / res + 1e-9).astype(int)
        hi = np.ceil((b.upper - workspace.lo) / res - 1e-9).astype(int)
        lo = np.clip(lo, 0, workspace.shape)
        hi = np.clip(hi, 0, workspace.shape)
        mask[tuple(slice(a, c) for a, c in zip(lo, hi))] = True
    return mask


class OccupancyGrid:
    """Log-odds occupancy belief.

    ``static`` marks cells known to be blocked for motion (the target's
    footprint).  They are never touched by scan updates, so the target never
    shows up as an obstacle in the log-odds layer.
    """

    def __init__(self, workspace: Workspace, l_hit=L_HIT, l_miss=L_MISS, l_min=L_MIN, l_max=L_MAX,
                 static=None):
        if not l_min < 0 < l_max:
            raise ValueError("clamp bounds must straddle zero")
        self.workspace = workspace
        self.l_hit, self.l_miss = float(l_hit), float(l_miss)
        self.l_min, self.l_max = float(l_min), float(l_max)
        self.cells = np.zeros(workspace.shape)
        self.static = np.zeros(workspace.shape, dtype=bool) if static is None else np.asarray(static, bool)

    def copy(self) -> "OccupancyGrid":
        g = OccupancyGrid(self.workspace, self.l_hit, self.l_miss, self.l_min, self.l_max, self.static.copy())
        g.cells = self.cells.copy()
        return g

    @property
    def shape(self):
        return self.cells.shape

    def occupied(self) -> np.ndarray:
        """Cells treated as obstacles by the log-odds layer (p > 0.5)."""
        return self.cells > 0.0

    def blocked(self) -> np.ndarray:
        return self.occupied() | self.static

    def occupied_centers(self) -> np.ndarray:
        idx = np.argwhere(self.occupied())
        return self.workspace.cell_center(idx).reshape(-1, self.workspace.ndim)

    def mark(self, mask, value=None):
        """Set cells directly (defaults to fully occupied); used for known maps."""
        self.cells[np.asarray(mask, bool)] = self.l_max if value is None else value
        np.clip(self.cells, self.l_min, self.l_max, out=self.cells)


def occupancy_probability(grid: OccupancyGrid, cell) -> float:
    cell = tuple(int(c) for c in cell)
    if len(cell) != grid.cells.ndim or any(c < 0 or c >= n for c, n in zip(cell, grid.shape)):
        raise IndexError(f"cell {cell} outside grid of shape {grid.shape}")
    return float(1.0 / (1.0 + np.exp(-grid.cells[cell])))


def _ray_cells(workspace, origin, terminals, distances):
    """Cells traversed strictly before each ray's terminal cell (step res/4)."""
    step = workspace.resolution / 4.0
    n = int(np.ceil(distances.max() / step)) + 1 if distances.size else 0
    t = np.arange(n) * step
    dirs = (terminals - origin) / np.maximum(distances, 1e-12)[:, None]
    valid = t[None, :] < distances[:, None]
    pts = origin + t[None, :, None] * dirs[:, None, :]
    pts = pts[valid]
    owner = np.broadcast_to(np.arange(len(distances))[:, None], valid.shape)[valid]
    pts_in = workspace.contains(pts)
    cells = workspace.cell_of(pts[pts_in])
    owner = owner[pts_in]
    term_cells = workspace.cell_of(terminals)
    not_terminal = np.any(cells != term_cells[owner], axis=1)
    return cells[not_terminal]


def integrate_depth_scan(grid: OccupancyGrid, pose: Pose, hits) -> OccupancyGrid:
    """Binary inverse-sensor-model update for one scan, in place.

    Each cell is updated at most once per scan: ``l_hit`` if any ray struck
    an obstacle inside it, otherwise ``l_miss`` if any ray passed through it.
    Target hits free the cells in front of the target but never mark it.
    """
    ws = grid.workspace
    origin = pose.position
    if not ws.contains(origin)[0]:
        raise DomainError(f"pose {origin.tolist()} outside workspace")
    res = hits if isinstance(hits, CastResult) else CastResult.from_hits(hits)
    if len(res) == 0:
        return grid

    shape = np.array(ws.shape)
    flat = lambda c: np.ravel_multi_index(c.T, shape)  # noqa: E731

    miss = flat(_ray_cells(ws, origin, res.terminals, res.distances)) if len(res) else np.zeros(0, int)
    obstacle = res.struck & ~res.targets
    # nudge into the struck geometry so a terminal on a cell face lands in
    # the occupied cell rather than the free one in front of it
    dirs = (res.terminals - origin) / np.maximum(res.distances, 1e-12)[:, None]
    term = (res.terminals + 1e-6 * ws.resolution * dirs)[obstacle]
    term = term[ws.contains(term)] if term.size else term.reshape(0, ws.ndim)
    hit = flat(ws.cell_of(term)) if len(term) else np.zeros(0, int)

    static = grid.static.ravel()
    hit = np.unique(hit)
    hit = hit[~static[hit]]
    miss = np.setdiff1d(miss, hit)
    miss = miss[~static[miss]]
    cells = grid.cells.reshape(-1)
    cells[hit] += grid.l_hit
    cells[miss] += grid.l_miss
    np.clip(cells, grid.l_min, grid.l_max, out=cells)
    return grid


def simulate_depth_sensor(scenario, pose: Pose) -> CastResult:
    """Cast the sensor bundle against the TRUE world.

    Obstacles are intersected exactly as boxes; the target is the sphere set
    of its surface samples, so ``targets`` flags rays whose first contact is a
    target coordinate.
    """
    ws = scenario.workspace
    if not ws.contains(pose.position)[0]:
        raise DomainError(f"pose {pose.position.tolist()} outside workspace")
    lo, hi = box_arrays(scenario.obstacles)
    if len(scenario.obstacles) and np.any(np.all((pose.position >= lo) & (pose.position <= hi), axis=1)):
        raise CollisionError(f"pose {pose.position.tolist()} inside an obstacle")
    sensor = scenario.sensor
    bundle = generate_ray_bundle(pose, sensor.fov, sensor.counts)
    return cast_world(scenario, pose.position, bundle.directions, sensor.max_range)


def cast_world(scenario, origin, directions, d_max) -> CastResult:
    target = scenario.target
    res = cast_bundle(origin, directions, d_max, target.spheres, target.c_r, target.sphere_is_target)
    lo, hi = box_arrays(scenario.obstacles)
    t_box = cast_boxes(origin, directions, lo, hi)
    closer = t_box < res.distances
    if np.any(closer):
        res.distances = np.where(closer, t_box, res.distances)
        res.terminals = origin + res.distances[:, None] * directions
        res.targets = res.targets & ~closer
        res.struck = res.struck | closer
        res.indices = np.where(closer, -1, res.indices)
    return res


class CollisionChecker:
    """Frozen snapshot of blocked cells for fast vectorized queries.

    A point collides when it lies outside the workspace, inside a blocked
    cell, or within ``inflation`` of a blocked cell centre.
    """

    def __init__(self, grid: OccupancyGrid, inflation: float, use_static=True):
        self.workspace = grid.workspace
        self.inflation = float(inflation)
        self.mask = grid.blocked() if use_static else grid.occupied()
        centers = self.workspace.cell_center(np.argwhere(self.mask)).reshape(-1, self.workspace.ndim)
        self._tree = cKDTree(centers) if len(centers) else None

    def colliding(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = ~self.workspace.contains(pts)
        if self._tree is None:
            return out
        inside = ~out
        cells = self.workspace.cell_of(pts[inside])
        blocked = self.mask[tuple(cells.T)]
        if self.inflation > 0:
            d, _ = self._tree.query(pts[inside], distance_upper_bound=self.inflation * (1 + 1e-12) + 1e-12)
            blocked |= d <= self.inflation + 1e-12
        out[inside] = blocked
        return out

    def segment_free(self, a, b, step=None) -> bool:
        return bool(self.segments_free(np.atleast_2d(a), np.atleast_2d(b), step)[0])

    def segments_free(self, A, B, step=None) -> np.ndarray:
        step = self.workspace.resolution / 4.0 if step is None else step
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        if self._tree is None:
            # only the (convex) workspace bounds remain
            return self.workspace.contains(A) & self.workspace.contains(B)
        lengths = np.linalg.norm(B - A, axis=1)
        n = np.maximum(np.ceil(lengths / step).astype(int), 1)
        owner = np.repeat(np.arange(len(A)), n + 1)
        start = np.cumsum(n + 1) - (n + 1)
        k = np.arange(owner.size) - start[owner]
        frac = k / n[owner]
        pts = A[owner] + frac[:, None] * (B - A)[owner]
        bad = self.colliding(pts)
        return ~np.bincount(owner[bad], minlength=len(A)).astype(bool)


def is_colliding(grid: OccupancyGrid, position, inflation: float) -> bool:
    """True iff an occupied cell (p > 0.5) contains ``position`` or has its
    centre within ``inflation`` of it."""
    return bool(CollisionChecker(grid, inflation, use_static=False).colliding(position)[0])
