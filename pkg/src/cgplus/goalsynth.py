"""Goal configuration discovery.

Two interleaved searches: a genetic algorithm over supporting structures
(which node rests on which surface of which parent) and a stochastic,
layer-by-layer optimiser for the planar poses of the children of each
parent.  A structure is only accepted once its poses have been synthesised.
"""
from __future__ import annotations

import hashlib
import logging
import time
from functools import lru_cache
from dataclasses import dataclass, field, replace

import numpy as np

from . import cgraph, geom
from .cgraph import SupportingRelation
from .errors import (
    DegenerateHullError,
    GoalInfeasibleError,
    InvalidGeometryError,
    LayerInfeasibleError,
    NoContactError,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 64
    max_generations: int = 200
    crossover_prob: float = 0.7
    mutation_prob: float = 0.2
    theta: float = 0.8
    elite_count: int = 2
    tournament_size: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if not (0 <= self.crossover_prob <= 1 and 0 <= self.mutation_prob <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")


@dataclass(frozen=True)
class PoseOptConfig:
    step: float = 0.01
    sigma0: float = 0.5
    decay: float = 0.95
    d_safe: float = 0.005
    max_iters: int = 2000
    restarts: int = 10
    rng_seed: int = 0
    # a restart ends early once the total loss has not improved for this many
    # iterations; None disables the cut-off
    patience: int | None = 300

    def __post_init__(self):
        if not 0 < self.decay < 1:
            raise ValueError("decay must lie in (0, 1)")
        if self.d_safe <= 0 or self.step <= 0:
            raise ValueError("d_safe and step must be positive")


def sub_seed(*parts):
    """Deterministic 64-bit seed from arbitrary printable parts."""
    h = hashlib.sha256("|".join(map(str, parts)).encode()).digest()
    return int.from_bytes(h[:8], "little")


# ---------------------------------------------------------------------------
# fitness


def fitness_from_ratios(ratios, theta):
    """Sum of per-relation occupancy excess over ``theta``."""
    return float(sum(max(r, theta) - theta for r in ratios))


@lru_cache(maxsize=None)
def base_footprint_area(node, stance=0):
    if not node.geometry:
        return 0.0
    T = geom.make_transform(node.stances[stance])
    pts = np.vstack([geom.transform_points(T @ p.local_pose, p.vertices_local()) for p in node.geometry])
    zmin = pts[:, 2].min()
    base = pts[pts[:, 2] <= zmin + cgraph.FOOTPRINT_TOLERANCE][:, :2]
    try:
        return geom.convex_hull_2d(base).area
    except DegenerateHullError:
        return 0.0


def occupancy_ratio(cg, rel):
    """Contact area over parent-surface area for one relation."""
    region = cg.nodes[rel.parent].surfaces[rel.surface].region
    parent_area = region.area
    if parent_area <= 0:
        raise InvalidGeometryError("zero-area parent surface")
    if rel.pose is None:
        area = min(base_footprint_area(cg.nodes[rel.child], rel.stance), parent_area)
    else:
        try:
            area = cgraph.contact_overlap(cg, rel)[0].area
        except NoContactError:
            area = 0.0
    return area / parent_area


def fitness(cg, theta, only=None):
    """Occupancy penalty F >= 0; lower is better, 0 when no surface is crowded.

    ``only`` restricts the sum to relations whose child is in that set.
    """
    held = cg.held
    ratios = [occupancy_ratio(cg, r) for c, r in sorted(cg.supports.items())
              if r.parent != cgraph.GRIPPER and c != held and (only is None or c in only)]
    return fitness_from_ratios(ratios, theta)


def fitness_floor(cg, theta):
    """Part of F owed to relations between fixed nodes, which no search can change."""
    return fitness(cg, theta, only={c for c in cg.supports if not cg.nodes[c].movable})


# ---------------------------------------------------------------------------
# structure individuals


@dataclass(frozen=True, eq=False)
class StructureIndividual:
    """Parent, surface and stance for every non-root node.

    ``base`` is the rough goal the search started from; relations that match
    it keep its poses, others are left unposed.  ``anchors`` map every movable
    node to the ``(fixed node, surface)`` it must stay under.
    """

    assignment: dict
    base: cgraph.ContactGraphPlus
    anchors: dict
    above: tuple = ()
    fitness: float | None = None

    def key(self):
        return tuple(sorted((c, *v) for c, v in self.assignment.items()))

    def stance(self, node):
        return self.assignment[node][2] if node in self.assignment else 0

    def children(self, node):
        return sorted(c for c, v in self.assignment.items() if v[0] == node)

    def subtree(self, node):
        out, stack = [], [node]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(self.children(n))
        return out

    def parent(self, node):
        v = self.assignment.get(node)
        return None if v is None else v[0]

    def anchor_of(self, node):
        """First non-movable ancestor and the surface the chain enters it by."""
        p, s = self.assignment[node][:2]
        while self.base.nodes[p].movable:
            p, s = self.assignment[p][:2]
        return p, s

    def is_ancestor(self, a, node):
        p = self.parent(node)
        while p is not None:
            if p == a:
                return True
            p = self.parent(p)
        return False

    def movable(self):
        return sorted(c for c in self.assignment if self.base.nodes[c].movable)

    def violations(self):
        """Unsatisfied ``(upper, lower)`` goal constraints."""
        return [(u, l) for u, l in self.above if not self.is_ancestor(l, u)]

    def to_graph(self):
        supports = {}
        for c, (p, s, st) in self.assignment.items():
            old = self.base.supports.get(c)
            pose = old.pose if old is not None and (old.parent, old.surface, old.stance) == (p, s, st) else None
            dof = old.dof if old is not None else 3
            supports[c] = SupportingRelation(p, c, s, pose, st, dof)
        return self.base.evolve(supports=supports)

    def with_assignment(self, assignment):
        return replace(self, assignment=assignment, fitness=None)

    def check(self):
        """Tree property and surface-type constraints; raises AssertionError."""
        for c, (p, s, st) in self.assignment.items():
            assert not self.is_ancestor(c, c), f"cycle at {c}"
            node = self.base.nodes[p]
            assert 0 <= s < len(node.surfaces) and node.surfaces[s].type != "none", f"bad surface for {c}"
            assert s in node.usable_surfaces(self.stance(p)), f"surface {s} of {p} not up"
            if self.base.nodes[c].movable:
                assert self.anchor_of(c) == self.anchors[c], f"{c} left its anchor"


def individual_from_graph(cg, above=()):
    assignment = {c: (r.parent, r.surface, r.stance) for c, r in cg.supports.items() if r.parent != cgraph.GRIPPER}
    ind = StructureIndividual(assignment, cg, {}, tuple(above))
    anchors = {c: ind.anchor_of(c) for c in assignment if cg.nodes[c].movable}
    return replace(ind, anchors=anchors)


def _fits_inside(base, child, stance, parent):
    """Necessary size condition for a contain relation (sorted extents)."""
    cb, pb = base.nodes[child].bbox, base.nodes[parent].bbox
    if cb is None or pb is None:
        return True
    R = base.nodes[child].stances[stance]
    ext = np.abs(R @ cb.rotation) @ (2 * cb.half_extents)
    pext = np.abs(pb.rotation) @ (2 * pb.half_extents)
    return ext[2] <= pext[2] + 1e-9 and all(a <= b + 1e-9 for a, b in zip(sorted(ext[:2]), sorted(pext[:2])))


def _targets(ind, c):
    """Valid (parent, surface) pairs for transplanting ``c``."""
    base = ind.base
    anchor = ind.anchors[c]
    banned = set(ind.subtree(c))
    candidates = [anchor[0]] + [m for m in ind.movable() if ind.anchors.get(m) == anchor]
    out = []
    for q in candidates:
        if q in banned:
            continue
        node = base.nodes[q]
        for s in node.usable_surfaces(ind.stance(q)):
            if q == anchor[0] and s != anchor[1]:
                continue
            if node.surfaces[s].type == "contain" and not _fits_inside(base, c, ind.stance(c), q):
                continue
            out.append((q, s))
    return out


def crossover(ind, rng):
    """Transplant one movable node (with its subtree) under a new parent surface."""
    cur = {c: ind.assignment[c][:2] for c in ind.movable()}
    options = []
    for c in ind.movable():
        ts = [t for t in _targets(ind, c) if t != cur[c]]
        if ts:
            options.append((c, ts))
    if not options:
        return ind
    c, ts = options[int(rng.integers(len(options)))]
    q, s = ts[int(rng.integers(len(ts)))]
    assignment = dict(ind.assignment)
    assignment[c] = (q, s, assignment[c][2])
    return ind.with_assignment(assignment)


def _repick_children(ind, assignment, node, stance, rng):
    """Move children of ``node`` onto surfaces that face up in ``stance``."""
    usable = ind.base.nodes[node].usable_surfaces(stance)
    for c in sorted(k for k, v in assignment.items() if v[0] == node):
        p, s, st = assignment[c]
        if s in usable:
            continue
        if not usable:
            return None
        assignment[c] = (p, usable[int(rng.integers(len(usable)))], st)
    return assignment


def mutate(ind, rng):
    """Re-pick a supporting surface (possibly re-orienting a movable parent)
    or re-pick a node's own resting stance."""
    base = ind.base
    surface_ops, stance_ops = [], []
    for c in sorted(ind.assignment):
        p, s, _ = ind.assignment[c]
        pnode = base.nodes[p]
        if base.nodes[p].movable:
            alts = [k for k, surf in enumerate(pnode.surfaces)
                    if surf.type != "none" and k != s and pnode.stance_for_surface(k) is not None
                    and (surf.type != "contain" or _fits_inside(base, c, ind.stance(c), p))]
        else:
            alts = []  # a fixed parent is the anchor; its surface is part of the goal
        if base.nodes[c].movable and alts:
            surface_ops.append((c, alts))
    for c in ind.movable():
        if len(base.nodes[c].stances) >= 2:
            stance_ops.append(c)
    ops = [("surface", o) for o in surface_ops] + [("stance", o) for o in stance_ops]
    if not ops:
        return ind
    kind, op = ops[int(rng.integers(len(ops)))]
    assignment = dict(ind.assignment)
    if kind == "surface":
        c, alts = op
        p, _, st = assignment[c]
        s_new = alts[int(rng.integers(len(alts)))]
        assignment[c] = (p, s_new, st)
        pnode = base.nodes[p]
        if s_new not in pnode.usable_surfaces(ind.stance(p)):
            k = pnode.stance_for_surface(s_new)
            pp, ps, _ = assignment[p]
            assignment[p] = (pp, ps, k)
            assignment = _repick_children(ind, assignment, p, k, rng)
    else:
        c = op
        choices = [k for k in range(len(base.nodes[c].stances)) if k != ind.stance(c)]
        k = choices[int(rng.integers(len(choices)))]
        p, s, _ = assignment[c]
        assignment[c] = (p, s, k)
        assignment = _repick_children(ind, assignment, c, k, rng)
    if assignment is None:
        return ind
    return ind.with_assignment(assignment)


# ---------------------------------------------------------------------------
# pose synthesis


def hinge_loss(sd, d_safe):
    return max(0.0, -sd / d_safe + 1.0)


def _with_poses(cg, poses):
    supports = dict(cg.supports)
    for c, pose in poses.items():
        supports[c] = replace(supports[c], pose=tuple(float(v) for v in pose))
    return cg.evolve(supports=supports)


def _relation_ok(cg, rel):
    return not cgraph.relation_violations(cg, rel)


def _layer_precheck(cg, parent, children):
    """Cheap necessary conditions; returns a reason string or None."""
    pnode = cg.nodes[parent]
    by_surface = {}
    for c in children:
        by_surface.setdefault(cg.supports[c].surface, []).append(c)
    for s, kids in by_surface.items():
        if pnode.surfaces[s].type != "contain" or pnode.bbox is None:
            continue
        h = pnode.bbox.half_extents
        if np.abs(pnode.bbox.rotation - np.eye(3)).max() > 1e-12:
            continue
        total = sum(base_footprint_area(cg.nodes[c], cg.supports[c].stance) for c in kids)
        if total > 4 * h[0] * h[1]:
            return f"footprints of {kids} exceed container area"
    return None


def layer_losses(cg, children, d_safe):
    losses = {}
    for pair in cgraph.collision_pairs(cg, children):
        sd = cgraph.pair_distance(cg, pair, cutoff=d_safe)
        L = hinge_loss(sd, d_safe)
        if L > 0:
            losses[pair] = L
    return losses


def _layer_accepts(cg, parent, children, losses, rel_ok=None):
    if losses:
        return False
    for c in children:
        ok = rel_ok[c] if rel_ok is not None and c in rel_ok else _relation_ok(cg, cg.supports[c])
        if not ok:
            return False
    for a in [parent, *cg.ancestors(parent)]:
        rel = cg.supports.get(a)
        if rel is not None and rel.parent != cgraph.GRIPPER and not _relation_ok(cg, rel):
            return False
    return True


def _directions(cg, children, losses, rng):
    """Per-child planar push direction from weighted pair repulsion."""
    total = sum(losses.values())
    mu = {c: np.zeros(2) for c in children}
    if total <= 0:
        return mu
    frames = {c: cgraph.surface_world_frame(cg, cg.supports[c].parent, cg.supports[c].surface)[:3, :3] for c in children}
    for ((u, i), (v, j)), L in losses.items():
        pu = cg.nodes[u].geometry[i].world_centroid(cgraph.world_pose(cg, u))
        pv = cg.nodes[v].geometry[j].world_centroid(cgraph.world_pose(cg, v))
        for me, d in ((u, pu - pv), (v, pv - pu)):
            if me not in mu:
                continue
            d2 = (frames[me].T @ d)[:2]
            norm = np.linalg.norm(d2)
            d2 = rng.standard_normal(2) if norm < 1e-12 else d2 / norm
            if norm < 1e-12:
                d2 /= np.linalg.norm(d2)
            mu[me] += (L / total) * d2
    return mu


def _support_pull(cg, c, ok=None):
    """Unit vector toward the supporting-surface centroid if the relation fails."""
    rel = cg.supports[c]
    if _relation_ok(cg, rel) if ok is None else ok:
        return np.zeros(2)
    centroid = cg.nodes[rel.parent].surfaces[rel.surface].region.centroid
    x = np.array(rel.pose[:2]) if rel.pose is not None else centroid
    d = centroid - x
    n = np.linalg.norm(d)
    return d / n if n > 1e-12 else np.zeros(2)


@dataclass
class LayerResult:
    parent: str
    poses: dict
    iterations: int
    restart: int
    sigma: float


def optimize_layer(cg, parent_node, cfg=PoseOptConfig(), rng=None, fixed=()):
    """Synthesise planar poses for the children of ``parent_node``.

    Pose update per iteration: ``x' = x + step * (mu + sigma_k * N(0, 1))``
    with ``sigma_k = sigma0 * decay**k``; ``mu`` is the loss-weighted
    repulsion direction (yaw receives noise only).  Accepts once every hinge
    loss is zero and the support/containment checks hold.  Restart 0 keeps
    already-posed children in place; later restarts move every free child.
    """
    rng = np.random.default_rng(cfg.rng_seed) if rng is None else rng
    fixed = set(fixed)
    children = [c for c in cg.children(parent_node) if c not in fixed]
    if not children:
        return LayerResult(parent_node, {}, 0, 0, cfg.sigma0)
    reason = _layer_precheck(cg, parent_node, cg.children(parent_node))
    if reason:
        raise LayerInfeasibleError(reason, {"precheck": reason})
    pnode = cg.nodes[parent_node]
    residuals = {}
    for restart in range(max(cfg.restarts, 1)):
        if restart == 0:
            free = [c for c in children if cg.supports[c].pose is None]
        else:
            free = list(children)
        poses = {}
        for c in children:
            rel = cg.supports[c]
            region = pnode.surfaces[rel.surface].region
            if c in free and rel.dof > 0:
                jitter = rng.uniform(-0.1, 0.1, 2) * region.extent
                base_yaw = (restart % 4) * np.pi / 2 if rel.dof == 3 else 0.0
                xy = region.centroid + (jitter if rel.dof >= 2 else np.array([jitter[0], 0.0]))
                poses[c] = np.array([xy[0], xy[1], base_yaw])
            else:
                pose = rel.pose if rel.pose is not None else (*region.centroid, 0.0)
                poses[c] = np.array(pose, dtype=float)
        movers = [c for c in free if cg.supports[c].dof > 0]
        best, since = np.inf, 0
        for k in range(cfg.max_iters):
            state = _with_poses(cg, poses)
            losses = layer_losses(state, children, cfg.d_safe)
            rel_ok = {c: _relation_ok(state, state.supports[c]) for c in children}
            if _layer_accepts(state, parent_node, children, losses, rel_ok):
                return LayerResult(parent_node, {c: tuple(poses[c]) for c in children}, k, restart,
                                   cfg.sigma0 * cfg.decay**k)
            if not movers:
                break
            total = sum(losses.values()) + sum(not ok for ok in rel_ok.values())
            if total < best - 1e-9:
                best, since = total, 0
            else:
                since += 1
                if cfg.patience is not None and since >= cfg.patience:
                    residuals = {f"{u}[{i}]~{v}[{j}]": L for ((u, i), (v, j)), L in losses.items()}
                    break
            sigma = cfg.sigma0 * cfg.decay**k
            mu = _directions(state, movers, losses, rng)
            for c in movers:
                dof = state.supports[c].dof
                step = mu[c] + _support_pull(state, c, rel_ok[c]) + sigma * rng.standard_normal(2)
                if dof == 1:
                    step[1] = 0.0
                poses[c][:2] += cfg.step * step
                if dof == 3:
                    poses[c][2] += cfg.step * sigma * rng.standard_normal()
            residuals = {f"{u}[{i}]~{v}[{j}]": L for ((u, i), (v, j)), L in losses.items()}
    raise LayerInfeasibleError(f"no feasible poses under {parent_node}", residuals)


@dataclass
class SynthesisResult:
    graph: cgraph.ContactGraphPlus
    layers: list = field(default_factory=list)


def max_depth(cg):
    return max((cg.depth(n) for n in cg.supports if cg.supports[n].parent != cgraph.GRIPPER), default=0)


def synthesize_poses(pt, cfg=PoseOptConfig(), rng=None):
    """Breadth-first pose synthesis over the parse tree, one parent at a time.

    Returns a :class:`SynthesisResult` whose graph has every pose set and
    passes full validation.
    """
    rng = np.random.default_rng(cfg.rng_seed) if rng is None else rng
    cg = pt
    layers = []
    for depth in range(max_depth(cg)):
        for node in sorted(n for n in cg.nodes if (n == cg.root or n in cg.supports) and cg.depth(n) == depth):
            if not cg.children(node):
                continue
            res = optimize_layer(cg, node, cfg, rng)
            cg = _with_poses(cg, res.poses)
            layers.append(res)
    violations = cgraph.validate(cg)
    if violations:
        raise LayerInfeasibleError("posed tree fails validation", {v: 1.0 for v in violations})
    return SynthesisResult(cg, layers)


# ---------------------------------------------------------------------------
# genetic search


@dataclass
class EvolveResult:
    individual: StructureIndividual
    graph: cgraph.ContactGraphPlus | None
    feasible: bool
    generations: int
    fitness: float
    pose_attempts: int = 0
    pose_seconds: float = 0.0  # wall time spent inside pose synthesis


def _describe(ind):
    return ", ".join(f"{c}->{p}[{s}]/{st}" for c, (p, s, st) in sorted(ind.assignment.items())
                     if ind.base.nodes[c].movable)


def _score(ind, theta):
    """Ranking key: occupancy penalty first, then unmet goal constraints."""
    if ind.fitness is None:
        object.__setattr__(ind, "fitness", fitness(ind.to_graph(), theta))
    return (ind.fitness, len(ind.violations()))


def _tournament(pop, scores, k, rng):
    idx = rng.choice(len(pop), size=min(k, len(pop)), replace=False)
    best = min(idx, key=lambda i: (scores[i], i))
    return pop[best]


def evolve(rough_goal, cfg=GAConfig(), pose_cfg=PoseOptConfig(), above=()):
    """Search supporting structures for the lowest-penalty feasible goal.

    ``above`` lists ``(upper, lower)`` pairs: ``upper`` must end up in the
    subtree of ``lower``.  Raises :class:`GoalInfeasibleError` when no
    structure admits a pose assignment.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    seed_ind = individual_from_graph(rough_goal, above)
    pop = [seed_ind]
    while len(pop) < cfg.population_size:
        ind = seed_ind
        for _ in range(int(rng.integers(1, 4))):
            ind = crossover(ind, rng) if rng.random() < 0.5 else mutate(ind, rng)
        pop.append(ind)

    floor = fitness_floor(rough_goal, cfg.theta)
    tried = {}
    best = None  # (fitness, individual, graph)
    attempts = 0
    pose_seconds = 0.0
    last_violations = []
    gen = 0
    for gen in range(cfg.max_generations + 1):
        scores = [_score(ind, cfg.theta) for ind in pop]
        order = sorted(range(len(pop)), key=lambda i: (scores[i], i))
        for i in order:
            ind = pop[i]
            if scores[i][1] > 0:
                continue
            key = ind.key()
            if key in tried:
                continue
            attempts += 1
            seed = sub_seed(pose_cfg.rng_seed, cfg.rng_seed, key)
            t0 = time.perf_counter()
            try:
                res = synthesize_poses(ind.to_graph(), pose_cfg, np.random.default_rng(seed))
                tried[key] = res.graph
                if best is None or ind.fitness < best[0]:
                    best = (ind.fitness, ind, res.graph)
                log.debug("gen %d: poses found for %s (F=%.4g)", gen, _describe(ind), ind.fitness)
            except LayerInfeasibleError as exc:
                tried[key] = None
                last_violations = list(exc.residuals)
                log.debug("gen %d: no poses for %s: %s", gen, _describe(ind), exc)
            finally:
                pose_seconds += time.perf_counter() - t0
            break
        if best is not None and best[0] <= floor + 1e-12:
            break
        if gen == cfg.max_generations:
            break
        elites = [pop[i] for i in order[: cfg.elite_count]]
        children = []
        while len(elites) + len(children) < cfg.population_size:
            child = _tournament(pop, scores, cfg.tournament_size, rng)
            if rng.random() < cfg.crossover_prob:
                child = crossover(child, rng)
            if rng.random() < cfg.mutation_prob:
                child = mutate(child, rng)
            children.append(child)
        pop = elites + children
    if best is None:
        cand = min(pop, key=lambda ind: _score(ind, cfg.theta))
        raise GoalInfeasibleError(
            "no supporting structure admits a feasible pose assignment",
            best=cand,
            violations=[f"above:{u}<{l}" for u, l in cand.violations()] + last_violations,
        )
    log.debug("evolve finished after %d generations, %d pose attempts", gen, attempts)
    return EvolveResult(best[1], best[2], True, gen, best[0], attempts, pose_seconds)
