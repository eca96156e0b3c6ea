"""Acceptance checks, one per criterion; each prints a PASS/FAIL line.

Run under pytest (``pytest -v -s tests/test_acceptance.py``) or directly
(``python tests/test_acceptance.py``).
"""
from __future__ import annotations

import statistics
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from cgplus import cgraph, cli, goalsynth, planner, scenes  # noqa: E402
from cgplus.errors import PlanNotFoundError  # noqa: E402
from cgplus.goalsynth import PoseOptConfig  # noqa: E402

from fuzzgen import abstract_graphs, bfs_key, concrete, random_fixture, solvable_by_bfs  # noqa: E402
from oracles import aabb_stable, edit_distances_from, voxel_protrusion  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def report(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", flush=True)
    return ok


# ---------------------------------------------------------------------------
# stacking benchmark (shared by two criteria)


@lru_cache(maxsize=None)
def stacking_runs():
    rows, trows = [], []
    for n in (2, 4, 6, 8, 10):
        a, b = cli.bench_stack(n, 10, seed=0)
        rows += a
        trows += b
    return rows, trows


def check_stacking_soundness():
    rows, trows = stacking_runs()
    valid = sum(r["valid"] for r in rows)
    lengths = sum(r["plan_length"] == r["expected_length"] for r in rows)
    slowest = max(sum(float(t[k]) for k in ("structure_s", "pose_s", "plan_s")) for t in trows)
    ok = len(rows) == 50 and valid == 50 and lengths == 50 and slowest < 60.0
    return report("stacking soundness", ok,
                  f"{valid}/50 valid, {lengths}/50 with length 2*moved, slowest run {slowest:.1f} s")


def check_scaling_trend():
    _, trows = stacking_runs()
    at10 = [t for t in trows if t["n"] == 10]
    med = {k: statistics.median(float(t[k]) for t in at10) for k in ("structure_s", "pose_s", "plan_s")}
    ok = med["structure_s"] >= med["pose_s"] and med["structure_s"] >= med["plan_s"]
    return report("scaling trend at n=10", ok,
                  "medians structure {structure_s:.3f} s, pose {pose_s:.3f} s, plan {plan_s:.3f} s".format(**med))


# ---------------------------------------------------------------------------
# scenario fixtures


def _run_pipeline(initial, rough, seed=0):
    ga, pose, opts = cli.load_config(None, seed)
    return cli.run_plan(initial, rough, [], ga, pose, opts, seed)


def _inside(cg, node, container):
    return container in cg.ancestors(node)


def check_cabinet():
    initial, rough = scenes.cabinet_scene()
    p, goal, _ = _run_pipeline(initial, rough)
    stacked = goal.supports["cylinder"].parent == "box" or goal.supports["box"].parent == "cylinder"
    in_cab = all(_inside(goal, n, "cabinet") for n in ("box", "cylinder"))
    goal_ok = cgraph.validate(goal) == []
    kinds = [(a.kind, a.node or a.parent, a.child) for a in p.actions]
    inner = [i for i, a in enumerate(p.actions) if a.kind == "Place" and _inside(goal, a.child, "cabinet")]
    opens = [i for i, (k, n, _) in enumerate(kinds) if k == "Open" and n == "cabinet"]
    closes = [i for i, (k, n, _) in enumerate(kinds) if k == "Close" and n == "cabinet"]
    order_ok = bool(inner and opens and closes) and opens[0] < inner[0] and closes[-1] > inner[-1]
    replay = planner.validate_plan(p, initial, goal).ok
    ok = stacked and in_cab and goal_ok and order_ok and replay
    return report("cabinet scenario", ok,
                  f"stacked={stacked} inside={in_cab} goal valid={goal_ok} open/close order={order_ok} "
                  f"replay={replay} plan={[str(a) for a in p.actions]}")


def check_nested():
    initial, rough = scenes.nested_scene()
    p, goal, _ = _run_pipeline(initial, rough)
    levels = ["wardrobe", "cabinet", "drawer"]
    inner = [i for i, a in enumerate(p.actions) if a.kind == "Place" and _inside(goal, a.child, "drawer")]
    opens = {a.node: i for i, a in enumerate(p.actions) if a.kind == "Open"}
    closes = {a.node: i for i, a in enumerate(p.actions) if a.kind == "Close"}
    order_ok = bool(inner) and all(opens.get(x, 10**9) < inner[0] for x in levels) and \
        all(closes.get(x, -1) > inner[-1] for x in levels)
    # every intermediate state passes full validation
    state, states_ok = initial, True
    for a in p.actions:
        state = cgraph.apply_action(state, a)
        states_ok &= cgraph.validate(state) == []
    exact = cgraph.state_differences(state, goal) == [] and cgraph.digest(state) == cgraph.digest(goal)
    replay = planner.validate_plan(p, initial, goal).ok
    ok = order_ok and states_ok and exact and replay
    return report("nested containers", ok,
                  f"{len(p)} actions, opens before first inner Place and closes after last={order_ok}, "
                  f"all states valid={states_ok}, exact replay={exact and replay}")


# ---------------------------------------------------------------------------
# check-level suites


def _hinge_suite():
    d = PoseOptConfig().d_safe
    return [goalsynth.hinge_loss(d, d), goalsynth.hinge_loss(0.0, d), goalsynth.hinge_loss(-d, d)] == [0.0, 1.0, 2.0]


def _fitness_suite():
    checks = [
        abs(goalsynth.fitness_from_ratios([0.5], 0.8) - 0.0) <= 1e-12,
        abs(goalsynth.fitness_from_ratios([0.9], 0.8) - 0.1) <= 1e-12,
        abs(goalsynth.fitness_from_ratios([0.9, 0.95, 0.3], 0.8) - 0.25) <= 1e-12,
    ]
    rng = np.random.default_rng(0)
    for _ in range(100):
        r = rng.uniform(0, 1, rng.integers(1, 8))
        theta = rng.uniform(0.05, 1.0)
        checks.append(abs(goalsynth.fitness_from_ratios(r, theta) - sum(max(x, theta) - theta for x in r)) <= 1e-12)
    return all(checks)


def _stability_cases(n=100, seed=0):
    """Randomised two-box piles on a table; returns ``(disagreements, stable cases)``."""
    rng = np.random.default_rng(seed)
    done = bad = pos = 0
    while done < n:
        half_t = rng.uniform(0.2, 0.5, 2)
        s1, s2 = rng.uniform(0.05, 0.3, 3), rng.uniform(0.05, 0.3, 3)
        m1, m2 = rng.uniform(0.1, 2.0, 2)
        yaw1 = float(rng.choice([0.0, np.pi / 2]))
        h1 = s1[:2][::-1] / 2 if yaw1 else s1[:2] / 2
        p1 = rng.uniform(-half_t - h1 / 2, half_t + h1 / 2)
        p2 = rng.uniform(-h1, h1)
        stack = rng.random() < 0.6
        blocks = [(p1, h1, m1)] + ([(p1 + p2, s2[:2] / 2, m2)] if stack else [])
        want, margin = aabb_stable((0.0, 0.0), half_t, blocks)
        if abs(margin) < 1e-6:
            continue
        root = scenes.root_node()
        table = scenes.table_node("table", (*(2 * half_t), 0.7))
        a = scenes.box_node("a", tuple(s1), mass=m1)
        b = scenes.box_node("b", tuple(s2), mass=m2)
        rels = [scenes.rel("scene", "table", pose=(0, 0, 0)), scenes.rel("table", "a", pose=(*p1, yaw1))]
        nodes = [table, a]
        if stack:
            # express the offset in the rotated frame of the lower box
            c, s = np.cos(-yaw1), np.sin(-yaw1)
            local = np.array([[c, -s], [s, c]]) @ p2
            rels.append(scenes.rel("a", "b", pose=(*local, -yaw1)))
            nodes.append(b)
        cg = scenes.build_graph(root, nodes, rels)
        bad += cgraph.check_stable(cg, "a") != want
        pos += want
        done += 1
    return bad, pos


def _rot(yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def _containment_cases(n=50, seed=0):
    """Randomised one- or two-box piles in a container; returns ``(disagreements, contained cases)``."""
    rng = np.random.default_rng(seed)
    wall = 0.005
    done = bad = pos = 0
    while done < n:
        W, D, H = rng.uniform(0.18, 0.3), rng.uniform(0.15, 0.25), rng.uniform(0.1, 0.2)
        s1, s2 = rng.uniform(0.04, 0.1, 3), rng.uniform(0.03, 0.08, 3)
        m1, m2 = rng.uniform(0.1, 1.0, 2)
        yaw1, yaw2 = rng.uniform(-np.pi, np.pi, 2)
        x1 = rng.uniform(-W / 2, W / 2)
        y1 = rng.uniform(-D / 2, D / 2)
        off = rng.uniform(-s1[:2] / 2, s1[:2] / 2)
        stack = rng.random() < 0.5
        # hand-computed poses in the container frame (origin at its centre)
        T1 = np.eye(4)
        T1[:3, :3] = _rot(yaw1)
        T1[:3, 3] = [x1, y1, -H / 2 + wall + s1[2] / 2]
        boxes = [(s1, T1)]
        com = m1 * np.array([x1, y1])
        if stack:
            T2 = np.eye(4)
            T2[:3, :3] = _rot(yaw1 + yaw2)
            T2[:3, 3] = [*(np.array([x1, y1]) + _rot(yaw1)[:2, :2] @ off), -H / 2 + wall + s1[2] + s2[2] / 2]
            boxes.append((s2, T2))
            com = com + m2 * T2[:2, 3]
        com = com / (m1 + (m2 if stack else 0.0))
        # stability oracle: CoM inside the floor rectangle and the lower box footprint
        floor_lo, floor_hi = np.array([-W / 2 + wall, -D / 2]), np.array([W / 2 - wall, D / 2 - wall])
        in_floor = min(*(com - floor_lo), *(floor_hi - com))
        local = _rot(yaw1)[:2, :2].T @ (com - [x1, y1])
        in_foot = min(*(s1[:2] / 2 - np.abs(local)))
        stable_margin = min(in_floor, in_foot)
        # filter: keep cases away from both decision boundaries
        corners = np.vstack([
            (np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]) * sz_ / 2) @ T[:3, :3].T
            + T[:3, 3] for sz_, T in boxes])
        corner_excess = (np.abs(corners) - [W / 2, D / 2, H / 2]).max()
        if abs(stable_margin) < 1e-4 or abs(corner_excess) < 2e-3:
            continue
        want = stable_margin > 0 and voxel_protrusion(boxes, np.array([W, D, H]) / 2) == -np.inf
        root = scenes.root_node()
        cont = scenes.container_node("cont", (W, D, H), wall=wall)
        a = scenes.box_node("a", tuple(s1), mass=m1)
        b = scenes.box_node("b", tuple(s2), mass=m2)
        rels = [scenes.rel("scene", "cont", pose=(0, 0, 0)), scenes.rel("cont", "a", pose=(x1, y1, yaw1))]
        nodes = [cont, a]
        if stack:
            rels.append(scenes.rel("a", "b", pose=(*off, yaw2)))
            nodes.append(b)
        cg = scenes.build_graph(root, nodes, rels)
        bad += cgraph.check_contain(cg, "a") != want
        pos += want
        done += 1
    return bad, pos


def check_level_suites():
    hinge = _hinge_suite()
    fit = _fitness_suite()
    stab, stab_pos = _stability_cases()
    cont, cont_pos = _containment_cases()
    ok = hinge and fit and stab == 0 and cont == 0
    return report("check-level suites", ok,
                  f"hinge exact={hinge}, occupancy sums to 1e-12={fit}, "
                  f"stability disagreements {stab}/100 ({stab_pos} stable), "
                  f"containment disagreements {cont}/50 ({cont_pos} contained)")


# ---------------------------------------------------------------------------
# GED oracle


def check_ged_oracle():
    pairs = mismatches = 0
    setups = [(m, ((0.0, 0.0, 0.0),), False) for m in range(1, 5)]
    setups += [(m, ((0.0, 0.0, 0.0), (0.1, 0.0, 0.0)), True) for m in range(1, 3)]
    for m, poses, gripper in setups:
        names, per_node, graphs = abstract_graphs(m, poses, gripper)
        labels = [[lab for lab in labs if lab[0] != cgraph.GRIPPER] for labs in per_node]
        built = {i: concrete(names, *g) for i, g in enumerate(graphs)}
        goals = [i for i, (combo, _) in enumerate(graphs) if all(p != cgraph.GRIPPER for p, _ in combo)]
        for i, g0 in enumerate(graphs):
            dist = edit_distances_from(bfs_key(*g0), labels)
            for j in goals:
                got = planner.ged_edit_script(built[i], built[j]).cost
                mismatches += got != dist[bfs_key(*graphs[j])]
                pairs += 1
    return report("GED oracle equivalence", mismatches == 0,
                  f"{pairs} graph pairs with <= 4 movable nodes, {mismatches} cost mismatches")


# ---------------------------------------------------------------------------
# planner fuzz


def check_planner_fuzz(count=500):
    cfg = PoseOptConfig(max_iters=400, restarts=4)
    invalid = not_found = confirmed = unconfirmed = 0
    for i in range(count):
        rng = np.random.default_rng(goalsynth.sub_seed("fuzz", i) % 2**32)
        cg0, cgg = random_fixture(rng)
        try:
            p = planner.plan(cg0, cgg, pose_cfg=cfg, seed=i)
        except PlanNotFoundError:
            not_found += 1
            solvable, _, capped = solvable_by_bfs(cg0, cgg)
            if solvable or capped:
                unconfirmed += 1
            else:
                confirmed += 1
            continue
        invalid += not planner.validate_plan(p, cg0, cgg).ok
    ok = invalid == 0 and unconfirmed == 0
    return report("planner soundness fuzz", ok,
                  f"{count} fixtures, {invalid} invalid plans, {not_found} plan-not-found "
                  f"({confirmed} confirmed unsolvable, {unconfirmed} not confirmed)")


# ---------------------------------------------------------------------------
# determinism


def check_determinism(tmp=None):
    import tempfile

    tmp = Path(tmp or tempfile.mkdtemp())
    outs = []
    for k in range(2):
        d = tmp / f"det{k}"
        d.mkdir(parents=True, exist_ok=True)
        cmds = [
            ["plan", "--scene", FIXTURES / "cabinet_scene.json", "--goal", FIXTURES / "cabinet_goal.json",
             "--seed", 7, "--out", d / "plan.json"],
            ["synth-goal", "--goal", FIXTURES / "cabinet_goal.json", "--seed", 7, "--out", d / "goal.json"],
            ["validate", "--scene", FIXTURES / "cabinet_scene.json", "--plan", d / "plan.json",
             "--out", d / "report.json"],
            ["bench-stack", "--n", 2, 4, "--repeats", 2, "--seed", 7, "--out", d / "bench.csv"],
        ]
        codes = [cli.main([str(x) for x in c]) for c in cmds]
        outs.append((codes, {f.name: f.read_bytes() for f in sorted(d.iterdir())}))
    same = outs[0] == outs[1]
    ok = same and outs[0][0] == [0, 0, 0, 0] and len(outs[0][1]) == 4
    return report("determinism", ok, f"exit codes {outs[0][0]}, 4 output files byte-identical={same}")


# ---------------------------------------------------------------------------
# pytest entry points


def test_stacking_soundness():
    assert check_stacking_soundness()


def test_scaling_trend():
    assert check_scaling_trend()


def test_cabinet_scenario():
    assert check_cabinet()


def test_nested_containers():
    assert check_nested()


def test_check_level_suites():
    assert check_level_suites()


def test_ged_oracle_equivalence():
    assert check_ged_oracle()


def test_planner_soundness_fuzz():
    assert check_planner_fuzz()


def test_determinism(tmp_path):
    assert check_determinism(tmp_path)


CHECKS = [check_stacking_soundness, check_scaling_trend, check_cabinet, check_nested, check_level_suites,
          check_ged_oracle, check_planner_fuzz, check_determinism]


if __name__ == "__main__":
    t0 = time.perf_counter()
    results = [c() for c in CHECKS]
    print(f"{sum(results)}/{len(results)} criteria passed in {time.perf_counter() - t0:.0f} s")
    sys.exit(0 if all(results) else 1)
