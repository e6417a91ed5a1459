"""Particle swarm search over candidate viewpoint positions."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasibleError
from .metric import ViewEvaluator


@dataclass(frozen=True)
class SwarmConfig:
    particles: int = 20
    iterations: int = 60
    w: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    vmax: float | None = None  # default: 10% of the search-box diagonal
    seed: int = 0
    init_tries: int = 100

    def __post_init__(self):
        if not 0.0 <= self.w < 1.0:
            raise ValueError("inertia w must satisfy 0 <= w < 1")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("acceleration coefficients must be non-negative")
        if self.particles < 1 or self.iterations < 0:
            raise ValueError("need at least one particle and a non-negative budget")


@dataclass
class Swarm:
    positions: np.ndarray
    velocities: np.ndarray
    scores: np.ndarray
    best_positions: np.ndarray
    best_scores: np.ndarray
    global_position: np.ndarray
    global_score: float
    lower: np.ndarray
    upper: np.ndarray
    vmax: float

    def copy(self) -> "Swarm":
        return replace(self, **{k: np.copy(v) for k, v in vars(self).items() if isinstance(v, np.ndarray)})


def _batch(score_fn, P):
    return np.asarray(score_fn(P), dtype=float).reshape(len(P))


def _clamp_speed(V, vmax):
    speed = np.linalg.norm(V, axis=1, keepdims=True)
    scale = np.where(speed > vmax, vmax / np.maximum(speed, 1e-300), 1.0)
    return V * scale


def make_swarm(positions, velocities, scores, lower, upper, vmax) -> Swarm:
    positions = np.asarray(positions, dtype=float)
    scores = np.asarray(scores, dtype=float)
    k = int(np.argmax(scores))
    return Swarm(positions.copy(), np.asarray(velocities, dtype=float).copy(), scores.copy(), positions.copy(),
                 scores.copy(), positions[k].copy(), float(scores[k]), np.asarray(lower, float),
                 np.asarray(upper, float), float(vmax))


def pso_step(swarm: Swarm, score_fn, rng: np.random.Generator, w=0.7, c1=1.5, c2=1.5) -> Swarm:
    """One velocity/position update, then re-score and update bests in place.

    r1, r2 are drawn once per particle per step.  Bests change only on
    strict improvement; infeasible positions score -inf and keep moving.
    """
    n = len(swarm.positions)
    r1 = rng.random((n, 1))
    r2 = rng.random((n, 1))
    V = (w * swarm.velocities + r1 * c1 * (swarm.best_positions - swarm.positions)
         + r2 * c2 * (swarm.global_position - swarm.positions))
    V = _clamp_speed(V, swarm.vmax)
    P = np.clip(swarm.positions + V, swarm.lower, swarm.upper)
    S = _batch(score_fn, P)
    swarm.positions, swarm.velocities, swarm.scores = P, V, S
    better = S > swarm.best_scores
    swarm.best_positions[better] = P[better]
    swarm.best_scores[better] = S[better]
    k = int(np.argmax(swarm.best_scores))
    if swarm.best_scores[k] > swarm.global_score:
        swarm.global_score = float(swarm.best_scores[k])
        swarm.global_position = swarm.best_positions[k].copy()
    return swarm


def initialize_swarm(score_fn, feasible_fn, lower, upper, config: SwarmConfig, rng) -> Swarm:
    """Uniform random feasible start positions (up to ``init_tries`` draws each)."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n, d = config.particles, lower.size
    P = lower + rng.random((n, d)) * (upper - lower)
    ok = feasible_fn(P)
    for _ in range(config.init_tries - 1):
        if ok.all():
            break
        bad = np.flatnonzero(~ok)
        P[bad] = lower + rng.random((bad.size, d)) * (upper - lower)
        ok[bad] = feasible_fn(P[bad])
    if not ok.any():
        raise InfeasibleError("no feasible particle found in the search box")
    vmax = config.vmax if config.vmax is not None else 0.1 * float(np.linalg.norm(upper - lower))
    V = (rng.random((n, d)) * 2.0 - 1.0) * 0.1 * (upper - lower)
    return make_swarm(P, _clamp_speed(V, vmax), _batch(score_fn, P), lower, upper, vmax)


def warm_start(previous: Swarm, score_fn, extra=None) -> Swarm:
    """Re-score a previous population against a changed objective.

    Personal bests reset to current positions; the previous global best is
    re-scored so a still-good viewpoint is never lost.
    """
    P = previous.positions.copy()
    S = _batch(score_fn, P)
    sw = make_swarm(P, previous.velocities, S, previous.lower, previous.upper, previous.vmax)
    seeds = [previous.global_position] + ([] if extra is None else [np.asarray(extra, float)])
    for q in seeds:
        s = float(_batch(score_fn, q[None, :])[0])
        if s > sw.global_score:
            sw.global_position, sw.global_score = q.copy(), s
    return sw


def run_swarm(swarm: Swarm, score_fn, config: SwarmConfig, rng, iterations=None) -> Swarm:
    for _ in range(config.iterations if iterations is None else iterations):
        pso_step(swarm, score_fn, rng, config.w, config.c1, config.c2)
    return swarm


def search_box(evaluator: ViewEvaluator, lower, upper):
    """Workspace clipped to the region within camera range of the target.

    Beyond that range no ray can reach a target coordinate, so G is zero.
    """
    reach = evaluator.camera.max_range + evaluator.target.c_r
    lo = np.maximum(lower, evaluator.target.lower - reach)
    hi = np.minimum(upper, evaluator.target.upper + reach)
    return lo, hi


def optimize_viewpoint(evaluator: ViewEvaluator, lower, upper, config: SwarmConfig = SwarmConfig(), rng=None,
                       warm: Swarm | None = None, iterations=None, extra=None):
    """Best-ever position and its ViewScore, plus the final swarm for warm starts."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    lo, hi = search_box(evaluator, np.asarray(lower, float), np.asarray(upper, float))
    if warm is None:
        swarm = initialize_swarm(evaluator.score, evaluator.feasible, lo, hi, config, rng)
    else:
        swarm = warm_start(warm, evaluator.score, extra)
    run_swarm(swarm, evaluator.score, config, rng, iterations)
    if not np.isfinite(swarm.global_score):
        raise InfeasibleError("swarm never visited a feasible viewpoint")
    best = swarm.global_position.copy()
    return best, evaluator.evaluate(best), swarm

