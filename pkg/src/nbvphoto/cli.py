"""Command-line front end: ``nbvphoto {run,heatmap,validate,tune-gp}``.

Log verbosity comes from the ``NBVPHOTO_LOG`` environment variable
(DEBUG, INFO, WARNING, ...; default WARNING).  Exit status: 0 success,
1 failed validation, 2 bad arguments or scenario, 3 mission/runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .coverage import GPModel, coverage_table, negative_log_likelihood, tune_hyperparameters
from .errors import NBVError, ScenarioError
from .raycast import Pose, generate_ray_bundle
from .world import cast_world

log = logging.getLogger("nbvphoto")


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _threads(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("need at least one thread")
    return v


def _load(path, seed=None):
    from .scenario import load_scenario

    sc = load_scenario(path)
    return sc if seed is None else sc.with_seed(seed)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_run(scenario, out, seed=None, threads=1) -> int:
    """Run a mission; write the log, coverage snapshot and photo records to ``out``."""
    from .mission import run_mission

    sc = _load(scenario, seed)
    mlog = run_mission(sc)
    out = Path(out)
    _write(out / "mission_log.json", mlog.to_json())
    rows = ["photo,tick,x,y,z,gamma_d,gamma_s,coverage_sum,G,coverage_before,coverage_after"]
    for i, p in enumerate(mlog.photos):
        d = p.as_dict()
        pos = d["position"] + [""] * (3 - len(d["position"]))
        rows.append(",".join(str(v) for v in [i + 1, d["tick"], *pos, d["gamma_d"], d["gamma_s"], d["coverage_sum"],
                                               d["G"], d["coverage_before"], d["coverage_after"]]))
    _write(out / "photos.csv", "\n".join(rows) + "\n")
    _write(out / "coverage_curve.csv",
           "photo,coverage\n" + "".join(f"{i},{c:.9f}\n" for i, c in enumerate(mlog.coverage_curve)))
    _write(out / "coverage_final.csv", coverage_table(mlog.field, sc.target))
    timing = mlog.timing_summary()
    _write(out / "timing.json", json.dumps(timing, indent=1) + "\n")
    print(f"scenario {sc.name} seed {mlog.seed}: {mlog.photo_count} photo(s), final coverage "
          f"{mlog.final_coverage:.4f}, {mlog.ticks} ticks, stop reason '{mlog.reason}', "
          f"mean candidate eval {timing.get('mean_ms', float('nan')):.3f} ms")
    return 0 if mlog.reason != "aborted" else 3


def cmd_heatmap(scenario, step, out, threads=1) -> int:
    from .oracle import heatmap_oracle

    sc = _load(scenario)
    hm = heatmap_oracle(sc, sc.initial_field(), step, threads=threads)
    _write(Path(out), hm.table())
    print(f"{len(hm.positions)} feasible of {hm.lattice_size} lattice points; argmax "
          f"{[round(float(v), 6) for v in hm.argmax]} G={hm.argmax_score:.6f}")
    return 0


def cmd_validate(suite) -> int:
    from .validation import SUITES

    names = list(SUITES) if suite == "all" else [suite]
    ok = True
    for n in names:
        for c in SUITES[n]():
            print(c.line())
            ok &= c.passed or c.info
    print("ALL PASS" if ok else "FAILURES")
    return 0 if ok else 1


def default_tuning_position(sc):
    """A point straight in front of the first face of interest, at 80% of camera range."""
    face = sc.target.faces[0]
    ax = "xyz".index(face[1])
    sign = 1.0 if face[0] == "+" else -1.0
    p = sc.target.center.copy()
    p[ax] += sign * (sc.target.extents[ax] / 2 + 0.8 * sc.camera.max_range)
    return np.clip(p, sc.workspace.lo, sc.workspace.hi)


def cmd_tune_gp(scenario, position=None) -> int:
    sc = _load(scenario)
    pos = default_tuning_position(sc) if position is None else np.asarray(position, float)
    pose = Pose.look_at(pos, sc.target.coords.mean(axis=0))
    bundle = generate_ray_bundle(pose, sc.camera.fov, sc.camera.eval_counts)
    hits = cast_world(sc, pose.position, bundle.directions, sc.camera.max_range)
    Xs, Ys = hits.terminals, hits.targets.astype(float)
    d = sc.target.spacing
    grid = [(sf, k * d) for sf in (0.25, 0.5, 0.75, 1.0) for k in (0.5, 1.0, 2.0, 4.0)]
    best = tune_hyperparameters(Xs, Ys, grid, sc.gp.sigma_n)
    print("sigma_f,sigma_l,nll")
    for sf, sl in grid:
        try:
            nll = negative_log_likelihood(Xs, Ys, GPModel(sf, sl, sc.gp.sigma_n))
            print(f"{sf},{sl},{nll:.6f}")
        except NBVError:
            print(f"{sf},{sl},singular")
    print(f"best: sigma_f={best.sigma_f} sigma_l={best.sigma_l} (from {len(Ys)} samples at {pos.tolist()})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    from .validation import SUITES

    ap = argparse.ArgumentParser(prog="nbvphoto", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a capture mission")
    r.add_argument("scenario", help="scenario YAML file or bundled scenario name")
    r.add_argument("--out", default="nbv_out", help="output directory")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--threads", type=_threads, default=1)

    h = sub.add_parser("heatmap", help="dense oracle score table")
    h.add_argument("scenario")
    h.add_argument("--step", type=_positive, default=1.0, help="lattice step in meters")
    h.add_argument("--out", default="heatmap.csv", help="output CSV file")
    h.add_argument("--threads", type=_threads, default=1)

    v = sub.add_parser("validate", help="run property suites")
    v.add_argument("suite", choices=[*SUITES, "all"])

    t = sub.add_parser("tune-gp", help="grid-search GP hyperparameters by NLL")
    t.add_argument("scenario")
    t.add_argument("--position", type=lambda s: [float(v) for v in s.split(",")], default=None,
                   help="comma-separated capture position")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("NBVPHOTO_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.scenario, args.out, args.seed, args.threads)
        if args.command == "heatmap":
            return cmd_heatmap(args.scenario, args.step, args.out, args.threads)
        if args.command == "validate":
            return cmd_validate(args.suite)
        return cmd_tune_gp(args.scenario, args.position)
    except ScenarioError as exc:
        print(f"nbvphoto: scenario error: {exc}", file=sys.stderr)
        return 2
    except NBVError as exc:
        print(f"nbvphoto: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
