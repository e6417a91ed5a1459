"""FOV-constrained ray bundles and ray-sphere casting.

Every discretized coordinate (target sample or occupied cell) is treated as a
sphere of radius ``c_r``.  A ray terminates at the nearest sphere entry point
in front of the origin, or at ``d_max`` when nothing is struck.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

_UNIT_TOL = 1e-9
_SPARSE_MIN = 40_000  # ray x sphere pairs above which candidate pairs come from a KD-tree
_NEAR_ANGLE = 0.25  # spheres subtending more than this (rad) are tested densely


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("zero-length direction")
    return v / n


@dataclass(frozen=True)
class Pose:
    """Camera or sensor placement.

    ``axis`` is the optical axis.  In 3D ``up`` completes the frame and must
    be perpendicular to ``axis``; in 2D it is ignored.
    """

    position: np.ndarray
    axis: np.ndarray
    up: np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        axis = np.asarray(self.axis, dtype=float)
        if pos.shape != axis.shape or pos.ndim != 1 or pos.size not in (2, 3):
            raise ValueError("position and axis must be matching 2- or 3-vectors")
        if abs(np.linalg.norm(axis) - 1.0) >= _UNIT_TOL:
            raise ValueError("optical axis must have unit norm")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "axis", axis)
        if pos.size == 3:
            up = np.array([0.0, 0.0, 1.0]) if self.up is None else np.asarray(self.up, dtype=float)
            if abs(np.linalg.norm(up) - 1.0) >= _UNIT_TOL or abs(up @ axis) >= _UNIT_TOL:
                raise ValueError("up reference must be a unit vector perpendicular to the axis")
            object.__setattr__(self, "up", up)
        else:
            object.__setattr__(self, "up", None)

    @property
    def ndim(self) -> int:
        return self.position.size

    @classmethod
    def look_at(cls, position, point, world_up=(0.0, 0.0, 1.0)) -> "Pose":
        position = np.asarray(position, dtype=float)
        axis = _unit(np.asarray(point, dtype=float) - position)
        if position.size == 2:
            return cls(position, axis)
        up = np.asarray(world_up, dtype=float)
        up = up - (up @ axis) * axis
        if np.linalg.norm(up) < 1e-6:
            # looking straight along world_up
            up = np.array([0.0, 1.0, 0.0]) - axis[1] * axis
        return cls(position, axis, _unit(up))

    def image_axes(self) -> np.ndarray:
        """Unit lateral directions of the image, one row per angular axis.

        2D: the left normal of the axis.  3D: (left, up), with left = up x axis
        so a positive azimuth turns counter-clockwise about ``up`` as in 2D.
        """
        if self.ndim == 2:
            a = self.axis
            return np.array([[-a[1], a[0]]])
        return np.array([np.cross(self.up, self.axis), self.up])


@dataclass(frozen=True)
class RayBundle:
    directions: np.ndarray  # (R, n_d) unit vectors
    angles: np.ndarray  # (R, n_d - 1) angular coordinates relative to the axis
    fov: tuple
    counts: tuple


@dataclass(frozen=True)
class RaycastHit:
    terminal: np.ndarray  # x_s
    target: bool  # y_s
    distance: float
    ray: int
    struck: bool = False  # terminated on geometry rather than at d_max
    index: int = -1  # winning coordinate, -1 when nothing was struck


@dataclass
class CastResult:
    """Vectorized form of a list of :class:`RaycastHit`."""

    terminals: np.ndarray  # (R, n_d)
    targets: np.ndarray  # (R,) bool
    distances: np.ndarray  # (R,)
    struck: np.ndarray  # (R,) bool
    indices: np.ndarray  # (R,) int, -1 for misses
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.distances.size

    def hits(self) -> list[RaycastHit]:
        return [
            RaycastHit(self.terminals[i].copy(), bool(self.targets[i]), float(self.distances[i]), i,
                       bool(self.struck[i]), int(self.indices[i]))
            for i in range(len(self))
        ]

    @classmethod
    def from_hits(cls, hits) -> "CastResult":
        hits = sorted(hits, key=lambda h: h.ray)
        return cls(
            np.array([h.terminal for h in hits], dtype=float),
            np.array([h.target for h in hits], dtype=bool),
            np.array([h.distance for h in hits], dtype=float),
            np.array([h.struck for h in hits], dtype=bool),
            np.array([h.index for h in hits], dtype=int),
        )


def _symmetric_angles(fov: float, count: int) -> np.ndarray:
    if count == 1:
        return np.zeros(1)
    a = np.linspace(-fov / 2.0, fov / 2.0, count)
    # exact antisymmetry keeps mirrored scenes bit-for-bit mirrored
    return 0.5 * (a - a[::-1])


def generate_ray_bundle(pose: Pose, fov, counts) -> RayBundle:
    """Uniform rays spanning ``[-fov/2, +fov/2]`` on each angular axis.

    In 3D the azimuth/elevation grid is laid out on a pinhole image plane, so
    ``atan`` of each direction's lateral components recovers its angles
    exactly.
    """
    fov = tuple(np.atleast_1d(np.asarray(fov, dtype=float)).tolist())
    counts = tuple(int(c) for c in np.atleast_1d(counts))
    n_ang = pose.ndim - 1
    if len(fov) == 1 and n_ang == 2:
        fov = fov * 2
    if len(counts) == 1 and n_ang == 2:
        counts = counts * 2
    if len(fov) != n_ang or len(counts) != n_ang:
        raise ValueError(f"expected {n_ang} fov/count entries for a {pose.ndim}D pose")
    if any(c < 1 for c in counts):
        raise ValueError("ray counts must be >= 1 per axis")
    if any(not (0.0 < f <= np.pi) for f in fov):
        raise ValueError("fov must lie in (0, pi]")

    lateral = pose.image_axes()
    if n_ang == 1:
        theta = _symmetric_angles(fov[0], counts[0])
        dirs = np.cos(theta)[:, None] * pose.axis + np.sin(theta)[:, None] * lateral[0]
        angles = theta[:, None]
    else:
        az = _symmetric_angles(fov[0], counts[0])
        el = _symmetric_angles(fov[1], counts[1])
        AZ, EL = np.meshgrid(az, el, indexing="ij")
        AZ, EL = AZ.ravel(), EL.ravel()
        dirs = pose.axis + np.tan(AZ)[:, None] * lateral[0] + np.tan(EL)[:, None] * lateral[1]
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        angles = np.column_stack([AZ, EL])
    return RayBundle(dirs, angles, fov, counts)


def _as_radii(c_r, n):
    r = np.broadcast_to(np.asarray(c_r, dtype=float), (n,))
    if np.any(r <= 0):
        raise ValueError("c_r must be positive")
    return r


def cast_ray(origin, u, d_max, spheres, c_r, is_target=None) -> RaycastHit:
    """Cast a single ray against a set of spheres.

    ``is_target`` flags which sphere centres belong to the target set; it
    may be a boolean array or a callable taking an index.
    """
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) >= _UNIT_TOL:
        raise ValueError("ray direction must be a unit vector")
    spheres = np.asarray(spheres, dtype=float).reshape(-1, u.size)
    if callable(is_target):
        is_target = np.array([bool(is_target(j)) for j in range(len(spheres))], dtype=bool)
    res = cast_bundle(origin, u[None, :], d_max, spheres, c_r, is_target, prefilter=False)
    return res.hits()[0]


def cast_bundle(origin, directions, d_max, spheres, c_r, is_target=None, *, prefilter=True) -> CastResult:
    """Nearest ray-sphere entry for every ray; vectorized over rays x spheres.

    Per coordinate ``z`` this is the closest-approach test: project ``z`` on
    the ray (``d_z``), reject ``d_z <= 0`` and misses with ``d_center >= c_r``,
    and take the near chord end.  Ties go to the lowest coordinate index.
    """
    p = np.asarray(origin, dtype=float)
    U = np.asarray(directions, dtype=float).reshape(-1, p.size)
    Z = np.asarray(spheres, dtype=float).reshape(-1, p.size)
    R = U.shape[0]
    radii = _as_radii(c_r, Z.shape[0]) if Z.shape[0] else np.zeros(0)
    if is_target is None:
        is_target = np.zeros(Z.shape[0], dtype=bool)
    is_target = np.asarray(is_target, dtype=bool)

    terminals = p + d_max * U
    distances = np.full(R, float(d_max))
    targets = np.zeros(R, dtype=bool)
    indices = np.full(R, -1, dtype=int)
    if Z.shape[0] == 0 or R == 0:
        return CastResult(terminals, targets, distances, np.zeros(R, dtype=bool), indices)

    rel = Z - p
    dist2 = np.einsum("ij,ij->i", rel, rel)
    keep = np.arange(Z.shape[0])
    if prefilter:
        reach = d_max + radii
        mask = dist2 < reach * reach
        s = U.sum(axis=0)
        ns = np.linalg.norm(s)
        if ns > 1e-9 and R > 1:
            axis = s / ns
            cone = np.arccos(np.clip(U @ axis, -1.0, 1.0)).max()
            d = np.sqrt(dist2)
            with np.errstate(divide="ignore", invalid="ignore"):
                ang = np.arccos(np.clip((rel @ axis) / d, -1.0, 1.0))
                slack = np.arcsin(np.clip(radii / d, 0.0, 1.0))
            mask &= (ang <= cone + slack + 1e-9) | (d <= radii)
        keep = np.flatnonzero(mask)
        if keep.size == 0:
            return CastResult(terminals, targets, distances, np.zeros(R, dtype=bool), indices)
        rel, dist2, radii = rel[keep], dist2[keep], radii[keep]

    if R * rel.shape[0] > _SPARSE_MIN:
        best, j = _nearest_entry_sparse(U, rel, dist2, radii)
    else:
        best, j = _nearest_entry_dense(U, rel, dist2, radii)
    struck = best < d_max
    distances = np.where(struck, best, distances)
    indices = np.where(struck, keep[np.maximum(j, 0)], -1)
    terminals = p + distances[:, None] * U
    targets = struck & is_target[np.maximum(indices, 0)]
    return CastResult(terminals, targets, distances, struck, indices)


def _entry(dz, dist2, r):
    # near chord end along the ray; inf when the closest approach misses
    dc2 = np.maximum(dist2 - dz * dz, 0.0)
    r2 = r * r
    ok = (dz > 0.0) & (dc2 < r2)
    return np.where(ok, np.maximum(dz - np.sqrt(np.where(ok, r2 - dc2, 0.0)), 0.0), np.inf)


def _nearest_entry_dense(U, rel, dist2, radii):
    d_int = _entry(U @ rel.T, dist2[None, :], radii[None, :])
    j = np.argmin(d_int, axis=1)
    return d_int[np.arange(len(U)), j], j


def _nearest_entry_sparse(U, rel, dist2, radii):
    """Same result as the dense path, testing only plausible (ray, sphere) pairs.

    A ray can enter a sphere only if its angle to the sphere's centre
    direction is below asin(r / |z - p|); pairs are gathered by a chord-length
    query between unit vectors.  Spheres close enough to subtend a wide angle
    are tested against every ray.
    """
    R = len(U)
    d = np.sqrt(dist2)
    with np.errstate(divide="ignore", invalid="ignore"):
        half = np.where(d > radii, np.arcsin(np.clip(radii / d, 0.0, 1.0)), np.pi)
    near = half > _NEAR_ANGLE
    best = np.full(R, np.inf)
    j = np.full(R, -1)
    rows, cols = [], []
    far = np.flatnonzero(~near)
    if far.size:
        chord = 2.0 * np.sin(half[far].max() / 2.0) * (1 + 1e-9) + 1e-12
        pairs = cKDTree(U).sparse_distance_matrix(cKDTree(rel[far] / d[far, None]), chord, output_type="ndarray")
        rows.append(pairs["i"].astype(int))
        cols.append(far[pairs["j"].astype(int)])
    nz = np.flatnonzero(near)
    if nz.size:
        rows.append(np.repeat(np.arange(R), nz.size))
        cols.append(np.tile(nz, R))
    if rows:
        r_i = np.concatenate(rows)
        c_j = np.concatenate(cols)
        dz = np.einsum("ij,ij->i", U[r_i], rel[c_j])
        t = _entry(dz, dist2[c_j], radii[c_j])
        hit = np.isfinite(t)
        r_i, c_j, t = r_i[hit], c_j[hit], t[hit]
        # per ray: smallest distance, ties to the lowest sphere index
        order = np.lexsort((c_j, t, r_i))
        r_i, c_j, t = r_i[order], c_j[order], t[order]
        first = np.ones(r_i.size, dtype=bool)
        first[1:] = r_i[1:] != r_i[:-1]
        best[r_i[first]] = t[first]
        j[r_i[first]] = c_j[first]
    return best, j


def cast_boxes(origin, directions, lower, upper):
    """Exact ray/axis-aligned-box entry distances (slab method).

    Returns an (R,) array of entry distances, ``inf`` where no box is hit.
    Origins inside a box report distance 0.
    """
    p = np.asarray(origin, dtype=float)
    U = np.asarray(directions, dtype=float).reshape(-1, p.size)
    lo = np.asarray(lower, dtype=float).reshape(-1, p.size)
    hi = np.asarray(upper, dtype=float).reshape(-1, p.size)
    if lo.shape[0] == 0:
        return np.full(U.shape[0], np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / U  # (R, d)
        t1 = (lo[None, :, :] - p) * inv[:, None, :]
        t2 = (hi[None, :, :] - p) * inv[:, None, :]
    # zero direction component: inside the slab -> unbounded, outside -> empty
    par = U[:, None, :] == 0.0
    inside = (p >= lo) & (p <= hi)
    tmin = np.where(par, np.where(inside[None], -np.inf, np.inf), np.minimum(t1, t2))
    tmax = np.where(par, np.where(inside[None], np.inf, -np.inf), np.maximum(t1, t2))
    t_near = tmin.max(axis=2)
    t_far = tmax.min(axis=2)
    hit = (t_near <= t_far) & (t_far >= 0.0)
    t = np.where(hit, np.maximum(t_near, 0.0), np.inf)
    return t.min(axis=1)
