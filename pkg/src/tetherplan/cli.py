"""Command line entry point: ``tetherplan {plan,simulate,run,export-bodies}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .control.simulate import MissionLog, simulate_mission
from .errors import (CollisionDuringExecution, ConfigError, DivergenceDetected, NoPathFound,
                     TetherPlanError)
from .formation import FormationState
from .planner import (FormationPath, Obstacle, PlanRequest, StateValidator, decompose_path, densify,
                      path_violations, plan, simplify)
from .scenes import SceneConfig, load_scene
from .vbody import body_for_state

log = logging.getLogger("tetherplan")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NO_PATH, EXIT_EXECUTION = 0, 1, 2, 3, 4
PLAN_FILE = "plan.json"
LOG_FILE = "mission_log.csv"


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _write_waypoints(path: Path, wp: np.ndarray) -> None:
    lines = ["x,y,z"] + [",".join(f"{v:.17g}" for v in row) for row in wp]
    path.write_text("\n".join(lines) + "\n")


def load_config(args) -> SceneConfig:
    cfg = load_scene(args.config)
    if args.seed is not None:
        cfg.seed = int(args.seed)
    if getattr(args, "max_time", None) is not None:
        cfg.planner = dataclasses.replace(cfg.planner, max_time=float(args.max_time))
    if args.out is not None:
        cfg.output_dir = args.out
    return cfg


def run_plan(cfg: SceneConfig, out: Path) -> dict:
    """Plan, simplify, densify and decompose; write the plan document and its companions."""
    timing = {}
    t0 = time.perf_counter()
    env = [Obstacle.from_mesh(m) for m in cfg.load_environment()]
    timing["load_and_bvh"] = time.perf_counter() - t0
    vcfg = cfg.planning_vbody
    validator = StateValidator(env, vcfg, cfg.rope_length, cfg.bounds)
    for label, s in (("start", cfg.start), ("goal", cfg.goal)):
        if not validator(s.as_array()):
            raise ConfigError(f"{label} state collides or violates the formation limits")
    p = cfg.planner
    req = PlanRequest(cfg.start, cfg.goal, cfg.bounds, env, vcfg, cfg.rope_length, rng_seed=cfg.seed,
                      max_time=p.max_time, goal_bias=p.goal_bias, step_size=p.step_size,
                      edge_resolution=p.edge_resolution, metric=p.metric,
                      verify_resolution=p.verify_resolution)
    t1 = time.perf_counter()
    raw = plan(req, validator)
    timing["rrt"] = time.perf_counter() - t1
    t2 = time.perf_counter()
    short = simplify(raw, validator, cfg.seed, resolution=p.edge_resolution, metric=p.metric,
                     shortcut_iterations=p.shortcut_iterations, collapse_distance=p.collapse_distance,
                     verify_resolution=p.verify_resolution)
    timing["simplify"] = time.perf_counter() - t2
    # extra waypoints keep the executed formation close to the validated straight edges
    spacing = cfg.trajectory.waypoint_spacing
    dense = densify(short, spacing, p.metric) if spacing > 0 else short
    wp1, wp2 = decompose_path(dense)
    timing["total"] = time.perf_counter() - t0

    doc = {
        "config_hash": cfg.config_hash(),
        "scene": cfg.name,
        "seed": cfg.seed,
        "rope_length": cfg.rope_length,
        "stats": {k: int(v) for k, v in raw.stats.items()},
        "raw_path": raw.states.tolist(),
        "path": short.states.tolist(),
        "dense_path": dense.states.tolist(),
        "waypoints_1": wp1.tolist(),
        "waypoints_2": wp2.tolist(),
    }
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / PLAN_FILE, doc)
    _write_waypoints(out / "waypoints_1.csv", wp1)
    _write_waypoints(out / "waypoints_2.csv", wp2)
    bodies = out / "bodies"
    bodies.mkdir(exist_ok=True)
    for i, s in enumerate(short.states):
        body = body_for_state(FormationState.from_array(s), cfg.rope_length, cfg.vbody)
        (bodies / f"state_{i:03d}.obj").write_text(body.mesh.to_obj())
    _dump_json(out / "timing.json", {"config_hash": doc["config_hash"], "seconds": timing,
                                     "stats": doc["stats"]})
    log.info("plan: %d raw states, %d after simplification, %d waypoints", len(raw), len(short), len(wp1))
    return doc


def read_plan(cfg: SceneConfig, out: Path, plan_path: Path | None = None) -> dict:
    path = plan_path or out / PLAN_FILE
    if not path.is_file():
        raise ConfigError(f"plan document not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("config_hash") != cfg.config_hash():
        raise ConfigError(f"plan {path} was produced for a different config (hash mismatch); re-run 'plan'")
    return doc


def _write_log(out: Path, mlog: MissionLog, summary: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / LOG_FILE).write_text(mlog.to_csv())
    _dump_json(out / "summary.json", summary)


def run_simulate(cfg: SceneConfig, doc: dict, out: Path) -> dict:
    wp1, wp2 = np.array(doc["waypoints_1"]), np.array(doc["waypoints_2"])
    env = [Obstacle.from_mesh(m) for m in cfg.load_environment()]
    s = cfg.simulation
    base = {"config_hash": doc["config_hash"], "scene": cfg.name, "seed": cfg.seed}
    try:
        mlog = simulate_mission(wp1, wp2, env, cfg.mpc, cfg.vbody, cfg.rope_length, speed=cfg.trajectory.speed,
                                settle_time=s.settle_time, abort_error=s.abort_error,
                                stop_on_collision=s.stop_on_collision, disturbance_std=s.disturbance_std,
                                seed=cfg.seed)
    except (CollisionDuringExecution, DivergenceDetected) as exc:
        summary = {**base, **exc.log.summary(wp1, wp2), "aborted": str(exc), "abort_tick": exc.tick}
        _write_log(out, exc.log, summary)
        raise
    summary = {**base, **mlog.summary(wp1, wp2), "safety_dx": cfg.vbody.safety_dx}
    _write_log(out, mlog, summary)
    log.info("simulate: %s", summary)
    return summary


def export_bodies(cfg: SceneConfig, out: Path, every: int = 10) -> int:
    """OBJ sequence of the measured formation's V-body from the mission log."""
    path = out / LOG_FILE
    if not path.is_file():
        raise ConfigError(f"mission log not found: {path}; run 'simulate' first")
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    cols = [header.index(f"meas_{n}") for n in ("x", "y", "z", "yaw", "d", "theta")]
    ti = header.index("t")
    frames = out / "frames"
    frames.mkdir(parents=True, exist_ok=True)
    n = 0
    for k, line in enumerate(lines[1:]):
        if k % every:
            continue
        row = line.split(",")
        s = FormationState.from_array([float(row[c]) for c in cols])
        body = body_for_state(s, cfg.rope_length, cfg.vbody)
        (frames / f"t_{float(row[ti]):08.3f}.obj").write_text(body.mesh.to_obj())
        n += 1
    return n


def revalidate(cfg: SceneConfig, doc: dict, factor: int = 10) -> int:
    """Number of invalid states along the simplified path at ``factor`` times finer resolution."""
    env = [Obstacle.from_mesh(m) for m in cfg.load_environment()]
    v = StateValidator(env, cfg.planning_vbody, cfg.rope_length, cfg.bounds)
    path = FormationPath(np.array(doc["path"]))
    return len(path_violations(path, v, cfg.planner.edge_resolution / factor, cfg.planner.metric))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tetherplan", description="Plan and simulate a rope-tethered two-quadrotor formation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("plan", "plan a formation path"), ("simulate", "execute a stored plan"),
                        ("run", "plan then simulate"), ("export-bodies", "OBJ sequence from the mission log")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="scene config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
        p.add_argument("--max-time", type=float, default=None, help="planner time budget in seconds")
        if name == "simulate":
            p.add_argument("--plan", default=None, help="plan document (default: <out>/plan.json)")
        if name == "export-bodies":
            p.add_argument("--every", type=int, default=10, help="export every n-th tick")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        out = Path(cfg.output_dir)
        if args.command == "plan":
            run_plan(cfg, out)
        elif args.command == "simulate":
            doc = read_plan(cfg, out, Path(args.plan) if args.plan else None)
            summary = run_simulate(cfg, doc, out)
            print(json.dumps(summary, sort_keys=True))
        elif args.command == "run":
            doc = run_plan(cfg, out)
            summary = run_simulate(cfg, doc, out)
            print(json.dumps(summary, sort_keys=True))
        else:
            n = export_bodies(cfg, out, args.every)
            print(f"wrote {n} OBJ frames to {out / 'frames'}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoPathFound as exc:
        print(f"no path: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    except (CollisionDuringExecution, DivergenceDetected) as exc:
        print(f"execution failed: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    except TetherPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
