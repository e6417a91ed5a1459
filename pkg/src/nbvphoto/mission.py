"""Closed-loop capture mission: sense, map, pick a viewpoint, move, photograph.

One tick senses from the current pose, folds the scan into the believed map,
re-optimizes the viewpoint when due, advances one step along the planned
path and captures when the viewpoint is reached.  All mutable state lives in
:class:`MissionState` and is touched only by the mission loop.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .coverage import CoverageField, commit_capture
from .errors import InfeasibleError, NoPathError
from .metric import ViewEvaluator, ViewScore, interest_centroid
from .optimizer import Swarm, optimize_viewpoint
from .planner import Path, path_is_safe, plan_path
from .raycast import Pose, generate_ray_bundle
from .world import CollisionChecker, OccupancyGrid, box_arrays, cast_world, integrate_depth_scan, simulate_depth_sensor

log = logging.getLogger(__name__)


@dataclass
class PhotoRecord:
    tick: int
    position: np.ndarray
    score: ViewScore
    coverage_before: float
    coverage_after: float

    def as_dict(self):
        return {"tick": self.tick, "position": [round(float(v), 9) for v in self.position],
                "gamma_d": _r(self.score.gamma_d), "gamma_s": _r(self.score.gamma_s),
                "coverage_sum": _r(self.score.coverage_sum), "G": _r(self.score.G),
                "coverage_before": _r(self.coverage_before), "coverage_after": _r(self.coverage_after)}


@dataclass
class MissionState:
    position: np.ndarray
    heading: np.ndarray
    grid: OccupancyGrid
    field: CoverageField
    viewpoint: np.ndarray | None = None
    viewpoint_score: float = 0.0
    path: Path | None = None
    swarm: Swarm | None = None
    photos: list = field(default_factory=list)
    tick: int = 0
    terminated: bool = False
    reason: str = ""
    trace: list = field(default_factory=list)
    coverage_curve: list = field(default_factory=list)
    collisions: int = 0
    reoptimizations: int = 0
    timings: list = field(default_factory=list)
    diagnostic: dict = field(default_factory=dict)

    def finish(self, reason, **diag):
        self.terminated = True
        self.reason = reason
        self.diagnostic.update(diag)
        log.info("mission terminated at tick %d: %s", self.tick, reason)


def _r(v):
    v = float(v)
    return v if not math.isfinite(v) else round(v, 9)


def initial_state(scenario) -> MissionState:
    target = scenario.target
    fld = scenario.initial_field()
    start = np.asarray(scenario.start, dtype=float)
    heading = target.center - start
    n = np.linalg.norm(heading)
    heading = heading / n if n > 0 else np.eye(scenario.ndim)[0]
    st = MissionState(start.copy(), heading, scenario.believed_grid(), fld)
    st.trace.append(start.copy())
    st.coverage_curve.append(fld.mean())
    return st


def _sensor_pose(position, heading) -> Pose:
    if len(position) == 3:
        return Pose.look_at(position, position + heading)
    return Pose(position, heading)


def _evaluator(state, scenario) -> ViewEvaluator:
    return ViewEvaluator(state.grid, scenario.target, state.field, scenario.camera, scenario.utility, scenario.gp,
                         scenario.inflation, cap=scenario.gp_cap)


def truly_colliding(scenario, points) -> np.ndarray:
    P = np.atleast_2d(points)
    if not scenario.obstacles:
        return np.zeros(len(P), dtype=bool)
    lo, hi = box_arrays(scenario.obstacles)
    inside = np.all((P[:, None, :] >= lo[None]) & (P[:, None, :] <= hi[None]), axis=2)
    return inside.any(axis=1)


def _escape_point(state, scenario, checker):
    """Nearest inflation-free cell centre reachable in a straight free line.

    Newly mapped cells can leave the robot inside an inflation zone it was
    outside of when the path was planned.
    """
    ws = scenario.workspace
    raw = CollisionChecker(state.grid, 0.0)
    cell = ws.cell_of(state.position)[0]
    reach = int(math.ceil(3 * scenario.inflation / ws.resolution)) + 1
    offs = np.stack(np.meshgrid(*[np.arange(-reach, reach + 1)] * ws.ndim, indexing="ij"), -1).reshape(-1, ws.ndim)
    cells = cell + offs
    shape = np.array(ws.shape)
    cells = cells[np.all((cells >= 0) & (cells < shape), axis=1)]
    pts = ws.cell_center(cells)
    ok = ~checker.colliding(pts)
    pts = pts[ok]
    if len(pts) == 0:
        return None
    order = np.lexsort((np.arange(len(pts)), np.linalg.norm(pts - state.position, axis=1)))
    for k in order:
        if raw.segment_free(state.position, pts[k]):
            return pts[k]
    return None


def _plan(state, scenario, checker, rng) -> Path:
    goal = state.viewpoint
    start = state.position
    prefix = None
    if checker.colliding(start)[0]:
        esc = _escape_point(state, scenario, checker)
        if esc is None:
            raise NoPathError("robot is boxed in by newly mapped obstacles")
        prefix, start = start, esc
    path = plan_path(state.grid, start, goal, scenario.inflation, rng=rng, checker=checker,
                     rrt_iterations=scenario.mission.rrt_iterations)
    if prefix is not None:
        path = Path(np.vstack([prefix, path.waypoints]))
    return path


def _reachable_region(state, scenario, checker):
    """Admissibility test for points whose cell connects to the robot's cell through free cells."""
    ws = scenario.workspace
    free = ~checker.colliding(ws.cell_centers().reshape(-1, ws.ndim)).reshape(ws.shape)
    start = state.position
    if checker.colliding(start)[0]:
        start = _escape_point(state, scenario, checker)
        if start is None:
            raise NoPathError("robot is boxed in by newly mapped obstacles")
    s_cell = tuple(ws.cell_of(start)[0])
    free[s_cell] = True
    labels, _ = ndimage.label(free, ndimage.generate_binary_structure(ws.ndim, ws.ndim))
    keep = labels[s_cell]

    def region(P):
        cells = ws.cell_of(np.atleast_2d(P))
        inside = ws.contains(P)
        cells = np.clip(cells, 0, np.array(ws.shape) - 1)
        return inside & (labels[tuple(cells.T)] == keep)

    return region


def _reoptimize(state, scenario, ev, rng, current_G):
    """Warm-started swarm search; switch viewpoints only on a clear improvement."""
    cfg = scenario.mission
    lo, hi = scenario.workspace.lo, scenario.workspace.hi
    best = None
    if state.swarm is not None:
        try:
            best, score, swarm = optimize_viewpoint(ev, lo, hi, scenario.pso, rng, warm=state.swarm,
                                                    iterations=cfg.warm_iterations, extra=state.viewpoint)
        except InfeasibleError:
            best = None
    # a collapsed warm swarm is no evidence that nothing is left to see
    if best is None or max(score.G, current_G) < cfg.gain_floor:
        best, score, swarm = optimize_viewpoint(ev, lo, hi, scenario.pso, rng, extra=state.viewpoint)
    state.swarm = swarm
    state.reoptimizations += 1
    if max(score.G, current_G) < cfg.gain_floor:
        state.finish("gain_floor", best_G=_r(max(score.G, current_G)))
        return False
    if state.viewpoint is None or score.G > (1.0 + cfg.switch_margin) * current_G:
        state.viewpoint = best
        state.viewpoint_score = score.G
        state.path = None
    return True


def _capture(state, scenario, ev):
    target = scenario.target
    pose = Pose.look_at(state.position, interest_centroid(target, state.field))
    bundle = generate_ray_bundle(pose, scenario.camera.fov, scenario.camera.capture_counts)
    hits = cast_world(scenario, pose.position, bundle.directions, scenario.camera.max_range)
    before = state.field.mean()
    score = ev.evaluate(state.position)
    state.field = commit_capture(state.field, hits, scenario.gp, target, scenario.gp_cap)
    after = state.field.mean()
    state.photos.append(PhotoRecord(state.tick, state.position.copy(), score, before, after))
    state.coverage_curve.append(after)
    state.viewpoint = None
    state.path = None
    log.info("photo %d at %s: coverage %.4f -> %.4f", len(state.photos), state.position.tolist(), before, after)
    if after <= before:
        state.finish("no_progress", coverage=_r(after))


def _advance(state, scenario):
    W = state.path.waypoints
    # drop waypoints already reached
    while len(W) > 1 and np.linalg.norm(W[0] - state.position) < 1e-9:
        W = W[1:]
    nxt = W[0]
    d = nxt - state.position
    dist = np.linalg.norm(d)
    if dist < 1e-9:
        state.path = Path(W)
        return
    u = d / dist
    half = 0.5 * min(scenario.sensor.fov)
    if math.acos(float(np.clip(u @ state.heading, -1.0, 1.0))) > half + 1e-12:
        state.heading = u  # turn in place; the next scan looks along the new leg
        return
    state.heading = u
    remaining = scenario.step
    pos = state.position.copy()
    while remaining > 1e-12 and len(W):
        seg = W[0] - pos
        ls = np.linalg.norm(seg)
        if ls <= remaining:
            pos, remaining = W[0].copy(), remaining - ls
            W = W[1:] if len(W) > 1 else W[:1]
            if ls < 1e-12:
                break
            if len(W) == 1 and np.allclose(pos, W[0]):
                break
            # the next leg may turn outside the view cone: stop at the corner
            v = W[0] - pos
            nv = np.linalg.norm(v)
            if nv > 1e-12 and math.acos(float(np.clip((v / nv) @ state.heading, -1.0, 1.0))) > half + 1e-12:
                break
        else:
            pos = pos + seg * (remaining / ls)
            remaining = 0.0
    samples = np.linspace(state.position, pos, 9)
    if truly_colliding(scenario, samples).any():
        state.collisions += 1
    state.position = pos
    state.path = Path(np.vstack([pos, W]) if not np.allclose(W[0], pos) else W)


def mission_tick(state: MissionState, scenario, rng: np.random.Generator) -> MissionState:
    """Advance the mission by one control cycle (see module docstring)."""
    if state.terminated:
        return state
    cfg = scenario.mission
    if state.field.mean() >= cfg.coverage_threshold:
        state.finish("coverage")
        return state
    if len(state.photos) >= cfg.max_photos:
        state.finish("max_photos")
        return state
    if state.tick >= cfg.max_ticks:
        state.finish("max_ticks")
        return state

    # 1. sense
    scan = simulate_depth_sensor(scenario, _sensor_pose(state.position, state.heading))
    integrate_depth_scan(state.grid, _sensor_pose(state.position, state.heading), scan)

    # 2. re-evaluate the current viewpoint; re-optimize when due
    ev = _evaluator(state, scenario)
    try:
        current_G = ev.evaluate(state.viewpoint).G if state.viewpoint is not None else -np.inf
        due = (state.viewpoint is None or not np.isfinite(current_G)
               or current_G < cfg.degrade_ratio * state.viewpoint_score or state.tick % cfg.reopt_every == 0)
        if due and not _reoptimize(state, scenario, ev, rng, current_G):
            return _close(state, ev)
        if state.path is None or not path_is_safe(ev.checker, state.path):
            try:
                state.path = _plan(state, scenario, ev.checker, rng)
            except NoPathError:
                # the viewpoint sits in a pocket the robot cannot enter; search
                # again among positions connected to the robot's cell
                log.info("viewpoint %s unreachable; re-optimizing over the reachable region",
                         state.viewpoint.tolist())
                ev.region = _reachable_region(state, scenario, ev.checker)
                state.swarm, state.viewpoint, state.path = None, None, None
                if not _reoptimize(state, scenario, ev, rng, -np.inf):
                    return _close(state, ev)
                state.path = _plan(state, scenario, ev.checker, rng)
    except (InfeasibleError, NoPathError) as exc:
        state.finish("aborted", error=type(exc).__name__, message=str(exc),
                     position=[_r(v) for v in state.position],
                     viewpoint=None if state.viewpoint is None else [_r(v) for v in state.viewpoint])
        return _close(state, ev)

    # 3. move
    if np.linalg.norm(state.position - state.viewpoint) > scenario.workspace.resolution:
        _advance(state, scenario)
    state.trace.append(state.position.copy())

    # 4. capture on arrival, then pick the next viewpoint
    if np.linalg.norm(state.position - state.viewpoint) <= scenario.workspace.resolution:
        _capture(state, scenario, ev)
        if not state.terminated and state.field.mean() < cfg.coverage_threshold and len(state.photos) < cfg.max_photos:
            ev2 = _evaluator(state, scenario)
            try:
                state.swarm = None  # the objective changed wholesale; search afresh
                _reoptimize(state, scenario, ev2, rng, -np.inf)
            except InfeasibleError as exc:
                state.finish("aborted", error=type(exc).__name__, message=str(exc))
            state.timings.extend(ev2.timings)
    state.tick += 1
    return _close(state, ev)


def _close(state, ev):
    state.timings.extend(ev.timings)
    ev.timings = []
    return state


@dataclass
class MissionLog:
    scenario: str
    seed: int
    reason: str
    ticks: int
    trace: list
    photos: list
    coverage_curve: list
    collisions: int
    reoptimizations: int
    final_coverage: float
    diagnostic: dict
    timings: np.ndarray
    field: CoverageField | None = None

    @property
    def photo_count(self) -> int:
        return len(self.photos)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "seed": self.seed, "reason": self.reason, "ticks": self.ticks,
                "photo_count": self.photo_count, "final_coverage": _r(self.final_coverage),
                "collisions": self.collisions, "reoptimizations": self.reoptimizations,
                "coverage_curve": [_r(c) for c in self.coverage_curve],
                "photos": [p.as_dict() for p in self.photos],
                "trace": [[_r(v) for v in p] for p in self.trace], "diagnostic": self.diagnostic}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def timing_summary(self) -> dict:
        """Per-candidate evaluation latency in milliseconds (not deterministic)."""
        t = np.asarray(self.timings) * 1e3
        if t.size == 0:
            return {"count": 0}
        edges = np.array([0, 0.5, 1, 2, 5, 10, 20, 50, np.inf])
        hist, _ = np.histogram(t, bins=edges)
        return {"count": int(t.size), "mean_ms": float(t.mean()), "median_ms": float(np.median(t)),
                "p95_ms": float(np.percentile(t, 95)), "max_ms": float(t.max()),
                "histogram_edges_ms": [str(e) for e in edges], "histogram_counts": hist.tolist()}


def run_mission(scenario, seed=None) -> MissionLog:
    """Tick until coverage, photo cap, gain floor, abort or the tick cap."""
    seed = scenario.seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    state = initial_state(scenario)
    while not state.terminated:
        mission_tick(state, scenario, rng)
    return MissionLog(scenario.name, seed, state.reason, state.tick, state.trace, state.photos,
                      state.coverage_curve, state.collisions, state.reoptimizations, state.field.mean(),
                      state.diagnostic, np.asarray(state.timings), state.field)
