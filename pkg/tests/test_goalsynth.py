import itertools

import numpy as np
import pytest

from cgplus import cgraph, goalsynth, scenes
from cgplus.errors import GoalInfeasibleError, LayerInfeasibleError
from cgplus.goalsynth import GAConfig, PoseOptConfig

from oracles import clip_convex, shoelace


# ---------------------------------------------------------------------------
# fitness and hinge arithmetic


def test_fitness_single_terms():
    assert goalsynth.fitness_from_ratios([0.5], 0.8) == 0.0
    assert abs(goalsynth.fitness_from_ratios([0.9], 0.8) - 0.1) <= 1e-12


def test_fitness_sums_terms():
    ratios = [0.9, 0.95, 0.3]
    ref = sum(max(r, 0.8) - 0.8 for r in ratios)
    assert abs(goalsynth.fitness_from_ratios(ratios, 0.8) - ref) <= 1e-12
    assert abs(goalsynth.fitness_from_ratios(ratios, 0.8) - 0.25) <= 1e-12


def test_hinge_values_are_exact():
    d = 0.005
    assert goalsynth.hinge_loss(d, d) == 0.0
    assert goalsynth.hinge_loss(0.0, d) == 1.0
    assert goalsynth.hinge_loss(-d, d) == 2.0


def test_config_validation():
    with pytest.raises(ValueError):
        GAConfig(theta=0.0)
    with pytest.raises(ValueError):
        GAConfig(population_size=1)
    with pytest.raises(ValueError):
        PoseOptConfig(decay=1.0)


def _two_boxes(pose_a=(-0.2, 0.0, 0.3), pose_b=(0.25, 0.1, 0.0)):
    root = scenes.root_node()
    table = scenes.table_node("table", (1.0, 0.6, 0.7))
    a = scenes.box_node("a", (0.3, 0.2, 0.1))
    b = scenes.box_node("b", (0.2, 0.2, 0.1))
    return scenes.build_graph(root, [table, a, b], [
        scenes.rel("scene", "table", pose=(0, 0, 0)),
        scenes.rel("table", "a", pose=pose_a),
        scenes.rel("table", "b", pose=pose_b),
    ], swap="table")


def test_occupancy_ratio_matches_polygon_clip():
    cg = _two_boxes(pose_a=(0.4, 0.2, 0.3))  # overhangs the table corner
    rel = cg.supports["a"]
    c, s = np.cos(0.3), np.sin(0.3)
    foot = np.array([[-0.15, -0.1], [0.15, -0.1], [0.15, 0.1], [-0.15, 0.1]]) @ np.array([[c, s], [-s, c]]) + [0.4, 0.2]
    table = np.array([[-0.5, -0.3], [0.5, -0.3], [0.5, 0.3], [-0.5, 0.3]])
    ref = shoelace(clip_convex(foot, table)) / 0.6
    assert goalsynth.occupancy_ratio(cg, rel) == pytest.approx(ref, rel=1e-9)


def test_unposed_ratio_uses_base_footprint():
    cg = _two_boxes()
    supports = dict(cg.supports)
    supports["a"] = scenes.rel("table", "a")
    ratio = goalsynth.occupancy_ratio(cg.evolve(supports=supports), supports["a"])
    assert ratio == pytest.approx(0.06 / 0.6)


# ---------------------------------------------------------------------------
# operators


def test_crossover_two_boxes_enumerates_targets():
    ind = goalsynth.individual_from_graph(_two_boxes())
    seen = set()
    for seed in range(30):
        child = goalsynth.crossover(ind, np.random.default_rng(seed))
        moved = {c: v for c, v in child.assignment.items() if v != ind.assignment[c]}
        assert len(moved) == 1
        seen.add(tuple(sorted(moved.items())))
    assert seen == {(("a", ("b", 0, 0)),), (("b", ("a", 0, 0)),)}


def test_mutate_without_alternatives_is_a_no_op():
    ind = goalsynth.individual_from_graph(_two_boxes())
    assert goalsynth.mutate(ind, np.random.default_rng(0)) is ind


def test_operators_preserve_invariants_on_cones():
    ind = goalsynth.individual_from_graph(scenes.cones_scene())
    rng = np.random.default_rng(4)
    for _ in range(400):
        ind = goalsynth.crossover(ind, rng) if rng.random() < 0.5 else goalsynth.mutate(ind, rng)
        ind.check()
        for c, (p, s, _) in ind.assignment.items():
            assert ind.base.nodes[p].semantic_label != "cone"
            if p == "disk":
                assert s in (0, 1)


def _valid_trees(cg, movable):
    """All parent/surface/stance assignments of ``movable`` satisfying the
    support-type and tree constraints, by plain enumeration."""
    options = {}
    for c in movable:
        opts = []
        for p in [n for n in cg.nodes if n != c and n != cg.root]:
            node = cg.nodes[p]
            for s, surf in enumerate(node.surfaces):
                if surf.type == "none":
                    continue
                for st in range(len(cg.nodes[c].stances)):
                    opts.append((p, s, st))
        options[c] = opts
    fixed = {c: (r.parent, r.surface, r.stance) for c, r in cg.supports.items() if c not in movable}
    out = set()
    for combo in itertools.product(*(options[c] for c in movable)):
        a = dict(fixed, **dict(zip(movable, combo)))
        ok = True
        for c in movable:
            seen, cur = set(), c
            while cur in a and ok:
                if cur in seen:
                    ok = False
                seen.add(cur)
                cur = a[cur][0]
            p, s, _ = a[c]
            pst = a[p][2] if p in a else 0
            if ok and s not in cg.nodes[p].usable_surfaces(pst):
                ok = False
        if ok:
            out.add(tuple(sorted((c, a[c]) for c in movable)))
    return out


def test_cones_result_is_an_enumerated_valid_tree():
    cg = scenes.cones_scene()
    supports = dict(cg.supports)
    supports["box"] = scenes.rel("disk", "box")
    supports["red_cone"] = scenes.rel("disk", "red_cone")
    rough = cg.evolve(supports=supports)
    movable = ["box", "disk", "grey_cone", "red_cone"]
    valid = _valid_trees(rough, movable)
    res = goalsynth.evolve(rough, GAConfig(rng_seed=3, max_generations=20), PoseOptConfig(rng_seed=3))
    got = tuple(sorted((c, res.individual.assignment[c]) for c in movable))
    assert got in valid
    assert cgraph.validate(res.graph) == []
    # the cone never carries anything in any enumerated tree
    assert all(p not in ("grey_cone", "red_cone") for t in valid for _, (p, _, _) in t)


# ---------------------------------------------------------------------------
# pose synthesis


def test_single_child_converges_immediately():
    cg = _two_boxes()
    supports = dict(cg.supports)
    del supports["b"]
    lone = cg.evolve(nodes={k: v for k, v in cg.nodes.items() if k != "b"}, supports=supports)
    res = goalsynth.optimize_layer(lone, "table", PoseOptConfig())
    assert res.iterations <= 1


def test_layers_follow_depth_order_on_cones():
    cg = scenes.cones_scene()
    supports = dict(cg.supports)
    supports["box"] = scenes.rel("disk", "box")
    supports["red_cone"] = scenes.rel("disk", "red_cone")
    res = goalsynth.synthesize_poses(cg.evolve(supports=supports), PoseOptConfig(rng_seed=1))
    order = [layer.parent for layer in res.layers]
    assert order.index("table") < order.index("disk")
    assert cgraph.validate(res.graph) == []


def test_disk_layer_feasible_set_is_confirmed_by_sampling():
    cg = scenes.cones_scene()
    supports = dict(cg.supports)
    supports["box"] = scenes.rel("disk", "box")
    supports["red_cone"] = scenes.rel("disk", "red_cone")
    cg = cg.evolve(supports=supports)
    res = goalsynth.optimize_layer(cg, "disk", PoseOptConfig(rng_seed=0))
    posed = goalsynth._with_poses(cg, res.poses)
    d = PoseOptConfig().d_safe
    pair = (("box", 0), ("red_cone", 0))
    assert cgraph.pair_distance(posed, pair) >= d
    assert cgraph.check_stable(posed, "box") and cgraph.check_stable(posed, "red_cone")
    # rejection sampling finds feasible pose pairs and agrees with the checker
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(300):
        poses = {c: (*rng.uniform(-0.2, 0.2, 2), rng.uniform(-np.pi, np.pi)) for c in ("box", "red_cone")}
        trial = goalsynth._with_poses(cg, poses)
        ok = (cgraph.pair_distance(trial, pair) >= d and cgraph.check_stable(trial, "box")
              and cgraph.check_stable(trial, "red_cone"))
        hits += ok
        if ok:
            assert cgraph.validate(trial) == []
    assert hits > 0


def test_overcrowded_layer_is_infeasible():
    root = scenes.root_node()
    table = scenes.table_node("table", (0.3, 0.3, 0.7))
    boxes = [scenes.box_node(f"b{i}", (0.35, 0.35, 0.1)) for i in range(3)]
    cg = scenes.build_graph(root, [table, *boxes], [scenes.rel("scene", "table", pose=(0, 0, 0))] +
                            [scenes.rel("table", f"b{i}") for i in range(3)])
    with pytest.raises(LayerInfeasibleError) as e:
        goalsynth.optimize_layer(cg, "table", PoseOptConfig(max_iters=100, restarts=2))
    assert e.value.residuals


# ---------------------------------------------------------------------------
# evolve


def test_valid_rough_goal_returns_in_generation_zero():
    cg = _two_boxes()
    res = goalsynth.evolve(cg, GAConfig(), PoseOptConfig())
    assert res.generations == 0
    assert cgraph.same_state(res.graph, cg)


def test_oversized_object_is_goal_infeasible():
    root = scenes.root_node()
    table = scenes.table_node("table", (1.0, 0.6, 0.7))
    cab = scenes.container_node("cab", (0.3, 0.3, 0.3))
    big = scenes.box_node("big", (0.5, 0.5, 0.5))
    cg = scenes.build_graph(root, [table, cab, big], [
        scenes.rel("scene", "table", pose=(0, 0, 0)),
        scenes.rel("table", "cab", pose=(0.3, 0, 0)),
        scenes.rel("cab", "big"),
    ], status={"cab": "closed"})
    with pytest.raises(GoalInfeasibleError):
        goalsynth.evolve(cg, GAConfig(max_generations=3, population_size=8),
                         PoseOptConfig(max_iters=50, restarts=1))


def test_stacking_goal_is_size_ordered_and_deterministic():
    initial, rough, above = scenes.stacking_scene(5, np.random.default_rng(0))
    runs = [goalsynth.evolve(rough, GAConfig(rng_seed=9), PoseOptConfig(rng_seed=9), above) for _ in range(2)]
    assert runs[0].individual.key() == runs[1].individual.key()
    assert cgraph.digest(runs[0].graph) == cgraph.digest(runs[1].graph)
    g = runs[0].graph
    for i in range(1, 5):
        assert g.supports[f"plate{i}"].parent == f"plate{i - 1}"
    assert cgraph.validate(g) == []
