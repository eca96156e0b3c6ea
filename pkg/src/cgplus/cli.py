"""Command-line front end: ``plan``, ``synth-goal``, ``validate``, ``bench-stack``.

Exit codes: 0 success, 1 validation failure, 2 input error, 3 goal
infeasible, 4 no plan found.  Output files depend only on the inputs and the
seed; wall times go to the optional ``--timings-out`` file.
"""
from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import logging
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import cgraph, goalsynth, io, planner, scenes
from .errors import (
    CGPlusError,
    GoalInfeasibleError,
    InconsistentGoalError,
    LayerInfeasibleError,
    NodeSetMismatchError,
    PlanNotFoundError,
    SceneFormatError,
)

EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NO_PLAN = 0, 1, 2, 3, 4

log = logging.getLogger("cgplus")


# ---------------------------------------------------------------------------
# configuration


def load_config(path, seed):
    """``(GAConfig, PoseOptConfig, planner options)`` from an optional JSON file.

    ``seed`` overrides both ``rng_seed`` fields.
    """
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SceneFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise SceneFormatError(f"{path}: expected an object")
    unknown = set(raw) - {"ga", "pose", "planner"}
    if unknown:
        raise SceneFormatError(f"config: unknown sections {sorted(unknown)}")

    def build(cls, section):
        values = dict(raw.get(section, {}))
        names = {f.name for f in fields(cls)}
        bad = set(values) - names
        if bad:
            raise SceneFormatError(f"config.{section}: unknown keys {sorted(bad)}")
        values["rng_seed"] = seed
        try:
            return cls(**values)
        except (TypeError, ValueError) as exc:
            raise SceneFormatError(f"config.{section}: {exc}") from exc

    ga, pose = build(goalsynth.GAConfig, "ga"), build(goalsynth.PoseOptConfig, "pose")
    opts = {"budget": 20000, "detour_iters": 400, "detour_restarts": 4}
    extra = set(raw.get("planner", {})) - set(opts)
    if extra:
        raise SceneFormatError(f"config.planner: unknown keys {sorted(extra)}")
    opts.update(raw.get("planner", {}))
    return ga, pose, opts


def config_meta(ga, pose, opts):
    return {"ga": asdict(ga), "pose": asdict(pose), "planner": dict(sorted(opts.items()))}


# ---------------------------------------------------------------------------
# pipeline


def synth_goal(rough, above, ga, pose):
    """Structure search plus pose synthesis; returns the EvolveResult."""
    return goalsynth.evolve(rough, ga, pose, above)


def run_plan(initial, rough, above, ga, pose, opts, seed):
    """Full pipeline; returns ``(plan, goal_graph, timings)``."""
    timings = {}
    t0 = time.perf_counter()
    res = synth_goal(rough, above, ga, pose)
    t1 = time.perf_counter()
    timings["structure_s"] = t1 - t0 - res.pose_seconds
    timings["pose_s"] = res.pose_seconds
    detour_cfg = goalsynth.PoseOptConfig(**{**asdict(pose), "max_iters": opts["detour_iters"],
                                            "restarts": opts["detour_restarts"]})
    p = planner.plan(initial, res.graph, pose_cfg=detour_cfg, seed=seed, budget=opts["budget"])
    timings["plan_s"] = time.perf_counter() - t1
    return p, res.graph, timings


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _timings_out(path, rows):
    if path is None:
        return
    Path(path).write_text(io.dumps(rows))


# ---------------------------------------------------------------------------
# commands


def cmd_plan(args):
    initial, _ = io.load_scene(args.scene)
    rough, above = io.load_scene(args.goal, check_physics=False)
    if set(initial.nodes) != set(rough.nodes):
        raise NodeSetMismatchError("scene and goal describe different objects")
    ga, pose, opts = load_config(args.config, args.seed)
    p, goal, timings = run_plan(initial, rough, above, ga, pose, opts, args.seed)
    meta = {"seed": args.seed, "config": config_meta(ga, pose, opts), "length": len(p),
            "initial_digest": cgraph.digest(initial), "goal_digest": cgraph.digest(goal)}
    _write(args.out, io.dumps(io.plan_to_dict(p, goal, meta)))
    _timings_out(args.timings_out, timings)
    log.info("plan with %d actions written", len(p))
    return EXIT_OK


def cmd_synth_goal(args):
    rough, above = io.load_scene(args.goal, check_physics=False)
    ga, pose, _ = load_config(args.config, args.seed)
    t0 = time.perf_counter()
    res = synth_goal(rough, above, ga, pose)
    _write(args.out, io.dumps(io.scene_to_dict(res.graph, above)))
    _timings_out(args.timings_out, {"structure_s": time.perf_counter() - t0 - res.pose_seconds,
                                    "pose_s": res.pose_seconds})
    log.info("goal found after %d generations (F=%.4g)", res.generations, res.fitness)
    return EXIT_OK


def cmd_validate(args):
    initial, _ = io.load_scene(args.scene)
    actions, digests, goal, _ = io.load_plan(args.plan, initial.nodes)
    report = planner.validate_plan(planner.Plan(actions, digests), initial, goal)
    out = {"ok": report.ok, "step": report.step, "reason": report.reason, "clause": report.clause}
    _write(args.out, io.dumps(out))
    return EXIT_OK if report.ok else EXIT_INVALID


BENCH_FIELDS = ["n", "repeat", "seed", "moved", "plan_length", "expected_length", "valid"]
TIMING_FIELDS = ["n", "repeat", "structure_s", "pose_s", "plan_s"]


def bench_stack(n, repeats, seed, ga=None, pose=None, opts=None):
    """Run the stacking benchmark; returns ``(rows, timing_rows)``."""
    if n < 2:
        raise ValueError("need at least two plates")
    rows, trows = [], []
    for r in range(repeats):
        run_seed = goalsynth.sub_seed(seed, n, r) % (2**31)
        g = goalsynth.GAConfig(**{**asdict(ga or goalsynth.GAConfig()), "rng_seed": run_seed})
        ps = goalsynth.PoseOptConfig(**{**asdict(pose or goalsynth.PoseOptConfig()), "rng_seed": run_seed})
        o = opts or load_config(None, run_seed)[2]
        initial, rough, above = scenes.stacking_scene(n, np.random.default_rng(run_seed))
        p, goal, timings = run_plan(initial, rough, above, g, ps, o, run_seed)
        moved = sum(not initial.supports[c].same_as(goal.supports[c]) for c in initial.supports)
        ok = planner.validate_plan(p, initial, goal).ok
        rows.append({"n": n, "repeat": r, "seed": run_seed, "moved": moved,
                     "plan_length": len(p), "expected_length": 2 * moved, "valid": ok})
        trows.append({"n": n, "repeat": r, **{k: f"{v:.6f}" for k, v in timings.items()}})
    return rows, trows


def _csv(rows, header):
    buf = _stdio.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_bench_stack(args):
    ga, pose, opts = load_config(args.config, args.seed)
    rows, trows = [], []
    for n in args.n:
        a, b = bench_stack(n, args.repeats, args.seed, ga, pose, opts)
        rows += a
        trows += b
    _write(args.out, _csv(rows, BENCH_FIELDS))
    if args.timings_out:
        Path(args.timings_out).write_text(_csv(trows, TIMING_FIELDS))
    return EXIT_OK if all(r["valid"] for r in rows) else EXIT_INVALID


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="cgplus", description="Contact-graph goal synthesis and task planning.")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, goal=True, scene=True):
        if scene:
            p.add_argument("--scene", required=True, help="initial scene JSON")
        if goal:
            p.add_argument("--goal", required=True, help="rough goal scene JSON")
        p.add_argument("--config", help="JSON with optional ga / pose / planner sections")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output file (stdout if omitted)")
        p.add_argument("--timings-out", help="wall-time report, kept apart from --out")
        p.add_argument("--log-level", default=argparse.SUPPRESS,
                       choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    common(sub.add_parser("plan", help="synthesise a goal and plan towards it"))
    common(sub.add_parser("synth-goal", help="synthesise a valid goal from a rough one"), scene=False)
    p = sub.add_parser("validate", help="replay a plan with full checks")
    common(p, goal=False)
    p.add_argument("--plan", required=True)
    p = sub.add_parser("bench-stack", help="plate stacking benchmark (CSV)")
    common(p, goal=False, scene=False)
    p.add_argument("--n", type=int, nargs="+", default=[2, 4, 6, 8, 10])
    p.add_argument("--repeats", type=int, default=10)
    return parser


COMMANDS = {"plan": cmd_plan, "synth-goal": cmd_synth_goal, "validate": cmd_validate,
            "bench-stack": cmd_bench_stack}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SceneFormatError, NodeSetMismatchError, OSError, ValueError) as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except (GoalInfeasibleError, LayerInfeasibleError, InconsistentGoalError) as exc:
        log.error("goal infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except PlanNotFoundError as exc:
        log.error("no plan found: %s", exc)
        for line in exc.trace:
            log.info("  %s", line)
        return EXIT_NO_PLAN
    except CGPlusError as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
