"""Collision-free routing on the believed map: grid A* (2D) and RRT* (3D)."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoPathError
from .world import CollisionChecker, OccupancyGrid

SQRT2 = math.sqrt(2.0)
_MOVES = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
          (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2)]


@dataclass(frozen=True)
class Path:
    waypoints: np.ndarray

    @property
    def length(self) -> float:
        if len(self.waypoints) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1).sum())

    @property
    def start(self):
        return self.waypoints[0]

    @property
    def goal(self):
        return self.waypoints[-1]


def path_is_safe(checker: CollisionChecker, path: Path) -> bool:
    W = path.waypoints
    if len(W) == 1:
        return not checker.colliding(W)[0]
    return bool(checker.segments_free(W[:-1], W[1:]).all())


def shortcut(checker: CollisionChecker, waypoints) -> np.ndarray:
    """Greedy line-of-sight smoothing: jump to the farthest visible waypoint."""
    W = np.asarray(waypoints, dtype=float)
    out = [W[0]]
    i = 0
    while i < len(W) - 1:
        rest = np.arange(len(W) - 1, i, -1)
        free = checker.segments_free(np.repeat(W[i][None], rest.size, axis=0), W[rest])
        j = int(rest[np.argmax(free)]) if free.any() else i + 1
        out.append(W[j])
        i = j
    return np.array(out)


def grid_free_masks(checker: CollisionChecker):
    """Free cell centres and free cell corners (diagonal-move midpoints)."""
    ws = checker.workspace
    centers = ws.cell_centers().reshape(-1, 2)
    free = ~checker.colliding(centers).reshape(ws.shape)
    nx, ny = ws.shape
    gx, gy = np.meshgrid(ws.lower[0] + np.arange(nx + 1) * ws.resolution,
                         ws.lower[1] + np.arange(ny + 1) * ws.resolution, indexing="ij")
    corners = np.column_stack([gx.ravel(), gy.ravel()])
    corner_free = ~checker.colliding(corners).reshape(nx + 1, ny + 1)
    return free, corner_free


def astar_cells(free, corner_free, start, goal):
    """8-connected A* over cells; returns (cell list, cost in cell units).

    A diagonal move is allowed only when the shared cell corner is free.
    """
    nx, ny = free.shape
    start, goal = tuple(start), tuple(goal)
    if not free[start] or not free[goal]:
        raise NoPathError("start or goal cell is blocked")
    g = np.full(free.shape, np.inf)
    parent = {}
    g[start] = 0.0
    h = lambda c: math.hypot(c[0] - goal[0], c[1] - goal[1])  # noqa: E731
    heap = [(h(start), 0.0, start)]
    closed = np.zeros(free.shape, dtype=bool)
    while heap:
        _, gc, cur = heapq.heappop(heap)
        if closed[cur]:
            continue
        if cur == goal:
            cells = [cur]
            while cells[-1] in parent:
                cells.append(parent[cells[-1]])
            return cells[::-1], gc
        closed[cur] = True
        i, j = cur
        for di, dj, cost in _MOVES:
            a, b = i + di, j + dj
            if not (0 <= a < nx and 0 <= b < ny) or not free[a, b] or closed[a, b]:
                continue
            if di and dj and not corner_free[max(i, a), max(j, b)]:
                continue
            ng = gc + cost
            if ng < g[a, b]:
                g[a, b] = ng
                parent[(a, b)] = cur
                heapq.heappush(heap, (ng + h((a, b)), ng, (a, b)))
    raise NoPathError(f"goal cell {goal} unreachable from {start}")


def plan_grid_astar(grid: OccupancyGrid, start, goal, inflation, checker=None, smooth=True) -> Path:
    """Shortest 8-connected route between cell centres, then shortcut-smoothed."""
    checker = CollisionChecker(grid, inflation) if checker is None else checker
    ws = grid.workspace
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if checker.colliding(np.vstack([start, goal])).any():
        raise NoPathError("start or goal collides at the inflation radius")
    if np.allclose(start, goal):
        return Path(start[None, :].copy())
    free, corner_free = grid_free_masks(checker)
    s_cell, g_cell = ws.cell_of(start)[0], ws.cell_of(goal)[0]
    # the endpoints are free even when their cell centres sit inside an
    # inflation zone; the final safety check covers the joining segments
    free[tuple(s_cell)] = free[tuple(g_cell)] = True
    cells, _ = astar_cells(free, corner_free, s_cell, g_cell)
    centers = ws.cell_center(np.array(cells))
    centers = centers[~checker.colliding(centers)]
    W = np.vstack([start, centers, goal])
    if smooth:
        W = shortcut(checker, W)
    path = Path(W)
    if not path_is_safe(checker, path):
        raise NoPathError("no collision-free connection between endpoints and the cell route")
    return path


def _unit_ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def plan_rrt_star(grid: OccupancyGrid, start, goal, inflation, iterations=5000, rng=None, checker=None,
                  step=None, goal_bias=0.05, smooth=False) -> Path:
    """RRT* with straight-line steering and shrinking rewiring radius.

    The goal counts as reached within one cell; the exact goal is appended
    when the final segment is free.
    """
    rng = np.random.default_rng() if rng is None else rng
    checker = CollisionChecker(grid, inflation) if checker is None else checker
    ws = grid.workspace
    lo, hi = ws.lo, ws.hi
    d = ws.ndim
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if checker.colliding(np.vstack([start, goal])).any():
        raise NoPathError("start or goal collides at the inflation radius")
    if np.allclose(start, goal):
        return Path(start[None, :].copy())
    tol = ws.resolution
    step = 0.1 * ws.diagonal if step is None else step
    gamma = 2.0 * (1.0 + 1.0 / d) ** (1.0 / d) * (np.prod(hi - lo) / _unit_ball_volume(d)) ** (1.0 / d)

    nodes = np.empty((iterations + 1, d))
    parent = np.full(iterations + 1, -1, dtype=int)
    cost = np.zeros(iterations + 1)
    nodes[0] = start
    n = 1

    for _ in range(iterations):
        x = goal if rng.random() < goal_bias else lo + rng.random(d) * (hi - lo)
        diff = nodes[:n] - x
        dist2 = np.einsum("ij,ij->i", diff, diff)
        k = int(np.argmin(dist2))
        dk = math.sqrt(dist2[k])
        if dk < 1e-12:
            continue
        new = nodes[k] + (x - nodes[k]) * min(1.0, step / dk)
        if checker.colliding(new)[0]:
            continue
        radius = min(gamma * (math.log(n + 1) / (n + 1)) ** (1.0 / d), step)
        diff = nodes[:n] - new
        dn = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        near = np.flatnonzero(dn <= radius)
        if k not in near:
            near = np.append(near, k)
        ok = checker.segments_free(nodes[near], np.repeat(new[None], near.size, axis=0))
        if not ok.any():
            continue
        near, dn_near = near[ok], dn[near[ok]]
        through = cost[near] + dn_near
        p = int(near[np.argmin(through)])
        nodes[n], parent[n], cost[n] = new, p, through.min()
        # rewire neighbours that get cheaper through the new node
        improve = cost[n] + dn_near < cost[near] - 1e-12
        for q in near[improve]:
            parent[q] = n
            _propagate(parent, cost, n + 1, q, cost[n] + dn[q] - cost[q])
        n += 1
    inside = np.flatnonzero(np.linalg.norm(nodes[:n] - goal, axis=1) <= tol)
    if inside.size == 0:
        raise NoPathError(f"no path within {iterations} iterations")
    best_node = int(inside[np.argmin(cost[inside])])
    chain = [best_node]
    while parent[chain[-1]] >= 0:
        chain.append(parent[chain[-1]])
    W = nodes[chain[::-1]]
    if np.linalg.norm(W[-1] - goal) > 1e-12 and checker.segment_free(W[-1], goal):
        W = np.vstack([W, goal])
    if smooth:
        W = shortcut(checker, W)
    return Path(W)


def _propagate(parent, cost, n, root, delta):
    # children of ``root`` shift by the same cost delta
    cost[root] += delta
    stack = [root]
    while stack:
        q = stack.pop()
        kids = np.flatnonzero(parent[:n] == q)
        cost[kids] += delta
        stack.extend(kids.tolist())


def plan_path(grid: OccupancyGrid, start, goal, inflation, rng=None, checker=None, rrt_iterations=5000) -> Path:
    if grid.workspace.ndim == 2:
        return plan_grid_astar(grid, start, goal, inflation, checker=checker)
    return plan_rrt_star(grid, start, goal, inflation, rrt_iterations, rng, checker=checker, smooth=True)
