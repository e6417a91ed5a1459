"""Scenario documents: one YAML mapping per file, units in meters and radians.

See ``docs/scenario_format.md`` for the schema.  Every section is optional
except ``workspace`` and ``target``; unknown keys are rejected with the
offending field path and line number.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .coverage import DEFAULT_CAP, CoverageField, GPModel, TargetModel
from .errors import ScenarioError
from .metric import CameraParams, UtilityParams
from .optimizer import SwarmConfig
from .world import L_HIT, L_MAX, L_MIN, L_MISS, BoxObstacle, OccupancyGrid, Workspace, rasterize_boxes

BUNDLED = ("free_space_2d", "one_obstacle_2d", "two_face_2d", "slash_2d", "t_obstacle_2d", "slab_3d")

_ANGLE_RE = re.compile(r"^[0-9eE+\-*/. ()pi]+$")


@dataclass(frozen=True)
class SensorParams:
    fov: tuple = (math.pi / 2,)
    max_range: float = 25.0
    counts: tuple = (61,)


@dataclass(frozen=True)
class OccupancyParams:
    l_hit: float = L_HIT
    l_miss: float = L_MISS
    l_min: float = L_MIN
    l_max: float = L_MAX


@dataclass(frozen=True)
class MissionConfig:
    coverage_threshold: float = 0.95
    max_photos: int = 10
    gain_floor: float = 1e-3
    reopt_every: int = 3
    degrade_ratio: float = 0.5
    switch_margin: float = 0.05
    step: float | None = None  # default: one cell
    inflation: float | None = None  # default: 1.5 cells
    warm_iterations: int = 20
    max_ticks: int = 3000
    rrt_iterations: int = 1500


@dataclass(frozen=True)
class Scenario:
    name: str
    workspace: Workspace
    target: TargetModel
    obstacles: tuple
    start: np.ndarray
    sensor: SensorParams = SensorParams()
    camera: CameraParams = CameraParams()
    utility: UtilityParams = UtilityParams()
    gp: GPModel = GPModel()
    gp_cap: int = DEFAULT_CAP
    occupancy: OccupancyParams = OccupancyParams()
    pso: SwarmConfig = SwarmConfig()
    mission: MissionConfig = MissionConfig()
    seed: int = 0
    initial_coverage: float = 0.0
    known_obstacles: bool = False
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def ndim(self) -> int:
        return self.workspace.ndim

    @property
    def inflation(self) -> float:
        m = self.mission.inflation
        return 1.5 * self.workspace.resolution if m is None else m

    @property
    def step(self) -> float:
        return self.workspace.resolution if self.mission.step is None else self.mission.step

    def target_box(self) -> BoxObstacle:
        return BoxObstacle(tuple(self.target.center), tuple(self.target.extents / 2.0))

    def believed_grid(self) -> OccupancyGrid:
        """Fresh belief: target footprint static-blocked, obstacles unknown
        unless the scenario declares them known."""
        occ = self.occupancy
        static = rasterize_boxes(self.workspace, [self.target_box()])
        grid = OccupancyGrid(self.workspace, occ.l_hit, occ.l_miss, occ.l_min, occ.l_max, static=static)
        if self.known_obstacles:
            grid.mark(rasterize_boxes(self.workspace, self.obstacles))
        return grid

    def known_grid(self) -> OccupancyGrid:
        grid = self.believed_grid()
        grid.mark(rasterize_boxes(self.workspace, self.obstacles))
        return grid

    def initial_field(self) -> CoverageField:
        fld = CoverageField.fresh(self.target)
        fld.mu[:] = self.initial_coverage
        return fld

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed), pso=replace(self.pso, seed=int(seed)))


def _angle(v, where):
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str) and _ANGLE_RE.match(v):
        try:
            return float(eval(v, {"__builtins__": {}}, {"pi": math.pi}))  # noqa: S307 - charset-restricted
        except Exception as exc:  # noqa: BLE001
            raise ScenarioError(f"{where}: cannot evaluate angle {v!r}") from exc
    raise ScenarioError(f"{where}: expected a number or pi expression, got {v!r}")


def _line_map(text):
    """Map dotted key paths to 1-based source lines."""
    out = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                out[path] = k.start_mark.line + 1
                walk(v, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, f"{prefix}[{i}]")

    try:
        walk(yaml.compose(text), "")
    except yaml.YAMLError:
        pass
    return out


class _Reader:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, path, msg):
        line = self.lines.get(path)
        where = f"line {line}, field '{path}'" if line else f"field '{path}'"
        raise ScenarioError(f"{where}: {msg}")

    def section(self, doc, path, allowed):
        if doc is None:
            return {}
        if not isinstance(doc, dict):
            self.fail(path, "expected a mapping")
        for k in doc:
            if k not in allowed:
                self.fail(f"{path}.{k}" if path else str(k), f"unknown key '{k}' (allowed: {', '.join(sorted(allowed))})")
        return doc

    def vector(self, value, path, n=None):
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, (int, float)) for v in value):
            self.fail(path, "expected a list of numbers")
        if n is not None and len(value) != n:
            self.fail(path, f"expected {n} entries, got {len(value)}")
        return tuple(float(v) for v in value)

    def angles(self, value, path, n):
        value = value if isinstance(value, (list, tuple)) else [value]
        if len(value) != n:
            self.fail(path, f"expected {n} angle(s), got {len(value)}")
        out = tuple(_angle(v, path) for v in value)
        if any(not (0.0 < a <= math.pi) for a in out):
            self.fail(path, "field of view must lie in (0, pi]")
        return out

    def counts(self, value, path, n):
        value = value if isinstance(value, (list, tuple)) else [value]
        if len(value) != n or not all(isinstance(v, int) and v >= 1 for v in value):
            self.fail(path, f"expected {n} positive integer ray count(s)")
        return tuple(value)


def _simple(reader, doc, path, cls, converters=None):
    names = {f.name for f in fields(cls)}
    doc = reader.section(doc, path, names)
    kw = {}
    for k, v in doc.items():
        conv = (converters or {}).get(k)
        try:
            kw[k] = conv(v, f"{path}.{k}") if conv else v
        except ScenarioError:
            raise
        except (TypeError, ValueError) as exc:
            reader.fail(f"{path}.{k}", str(exc))
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        reader.fail(path, str(exc))


TOP_KEYS = {"name", "seed", "workspace", "target", "obstacles", "start", "sensor", "camera", "utility", "gp",
            "occupancy", "pso", "mission", "initial_coverage", "known_obstacles"}


def scenario_from_dict(doc: dict, lines=None, name="scenario") -> Scenario:
    r = _Reader(lines or {})
    doc = r.section(doc, "", TOP_KEYS)
    if "workspace" not in doc or "target" not in doc:
        raise ScenarioError("scenario needs 'workspace' and 'target' sections")

    w = r.section(doc["workspace"], "workspace", {"lower", "upper", "resolution"})
    lower = r.vector(w.get("lower"), "workspace.lower")
    nd = len(lower)
    if nd not in (2, 3):
        r.fail("workspace.lower", "workspace must be 2D or 3D")
    upper = r.vector(w.get("upper"), "workspace.upper", nd)
    try:
        ws = Workspace(lower, upper, float(w.get("resolution", 1.0)))
    except ValueError as exc:
        r.fail("workspace", str(exc))

    t = r.section(doc["target"], "target", {"center", "extents", "spacing", "faces", "c_r"})
    spacing = float(t.get("spacing", 0.5 * ws.resolution))
    faces = t.get("faces", "all")
    try:
        target = TargetModel.from_box(r.vector(t.get("center"), "target.center", nd),
                                      r.vector(t.get("extents"), "target.extents", nd), spacing, faces,
                                      t.get("c_r"))
    except ValueError as exc:
        r.fail("target", str(exc))

    obstacles = []
    for i, o in enumerate(doc.get("obstacles") or []):
        o = r.section(o, f"obstacles[{i}]", {"center", "half_extents"})
        try:
            obstacles.append(BoxObstacle(r.vector(o.get("center"), f"obstacles[{i}].center", nd),
                                         r.vector(o.get("half_extents"), f"obstacles[{i}].half_extents", nd)))
        except ValueError as exc:
            r.fail(f"obstacles[{i}]", str(exc))

    start = np.array(r.vector(doc.get("start", list(ws.lower)), "start", nd))
    if not ws.contains(start)[0]:
        r.fail("start", "start position lies outside the workspace")

    n_ang = nd - 1
    sensor = _simple(r, doc.get("sensor"), "sensor", SensorParams, {
        "fov": lambda v, p: r.angles(v, p, n_ang), "counts": lambda v, p: r.counts(v, p, n_ang),
        "max_range": lambda v, p: float(v)})
    if "fov" not in (doc.get("sensor") or {}):
        sensor = replace(sensor, fov=(math.pi / 2,) * n_ang)
    if "counts" not in (doc.get("sensor") or {}):
        sensor = replace(sensor, counts=(61,) if nd == 2 else (24, 24))

    cam_doc = dict(r.section(doc.get("camera"), "camera", {"fov", "beta", "eval_counts", "capture_counts", "max_range"}))
    beta = float(cam_doc.pop("beta", 0.8))
    cam = _simple(r, cam_doc, "camera", CameraParams, {
        "fov": lambda v, p: r.angles(v, p, n_ang), "eval_counts": lambda v, p: r.counts(v, p, n_ang),
        "capture_counts": lambda v, p: r.counts(v, p, n_ang), "max_range": lambda v, p: float(v)})
    defaults = {"fov": (math.pi / 2,) * n_ang, "eval_counts": (61,) if nd == 2 else (24, 24),
                "capture_counts": (721,) if nd == 2 else (96, 96), "max_range": sensor.max_range}
    cam = replace(cam, **{k: v for k, v in defaults.items() if k not in cam_doc})

    u_doc = r.section(doc.get("utility"), "utility", {"q_d", "q_s", "q_s_upper"})
    try:
        utility = UtilityParams(beta=beta, **{k: r.vector(v, f"utility.{k}", 4) for k, v in u_doc.items()})
    except ValueError as exc:
        r.fail("camera.beta", str(exc))

    g = dict(r.section(doc.get("gp"), "gp", {"sigma_f", "sigma_l", "sigma_n", "cap"}))
    cap = int(g.pop("cap", DEFAULT_CAP))
    g.setdefault("sigma_l", 2.0 * spacing)
    try:
        gp = GPModel(**{k: float(v) for k, v in g.items()})
    except ValueError as exc:
        r.fail("gp", str(exc))

    occ = _simple(r, doc.get("occupancy"), "occupancy", OccupancyParams)
    seed = int(doc.get("seed", 0))
    pso = _simple(r, doc.get("pso"), "pso", SwarmConfig)
    pso = replace(pso, seed=seed)
    mission = _simple(r, doc.get("mission"), "mission", MissionConfig)

    init = float(doc.get("initial_coverage", 0.0))
    if not 0.0 <= init <= 1.0:
        r.fail("initial_coverage", "must lie in [0, 1]")
    return Scenario(str(doc.get("name", name)), ws, target, tuple(obstacles), start, sensor, cam, utility, gp, cap,
                    occ, pso, mission, seed, init, bool(doc.get("known_obstacles", False)), doc)


def load_scenario(path_or_name) -> Scenario:
    """Load a scenario from a YAML file, or a bundled scenario by name."""
    text, name = _read(path_or_name)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark else ""
        raise ScenarioError(f"{where}malformed YAML ({getattr(exc, 'problem', exc)})") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario file must hold a single mapping")
    return scenario_from_dict(doc, _line_map(text), name)


def _read(path_or_name):
    p = Path(str(path_or_name))
    if p.exists():
        return p.read_text(), p.stem
    if str(path_or_name) in BUNDLED:
        res = resources.files("nbvphoto.scenarios").joinpath(f"{path_or_name}.yaml")
        return res.read_text(), str(path_or_name)
    raise ScenarioError(f"no scenario file or bundled scenario named {path_or_name!r} "
                        f"(bundled: {', '.join(BUNDLED)})")
