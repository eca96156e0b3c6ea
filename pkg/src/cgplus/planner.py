"""Edit-script planning between two contact graphs.

The pipeline is ``ged_edit_script`` (what must change), ``derive_constraints``
(partial order over the edits) and ``topo_plan`` (a depth-first topological
sort that simulates every step and detours objects through a swap node when a
placement is blocked).  ``validate_plan`` replays a plan with full checks.
"""
from __future__ import annotations

import graphlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import cgraph, goalsynth
from .cgraph import GRIPPER, Action, SupportingRelation
from .errors import (
    ActionPreconditionError,
    InconsistentGoalError,
    LayerInfeasibleError,
    NodeSetMismatchError,
    PlanNotFoundError,
)

REASONS = ("precedence", "spatial", "accessibility")


@dataclass(frozen=True)
class TemporalConstraint:
    before: str
    after: str
    reason: str

    def __post_init__(self):
        if self.before == self.after:
            raise ValueError("a constraint needs two distinct actions")
        if self.reason not in REASONS:
            raise ValueError(f"unknown reason {self.reason!r}")


@dataclass
class EditScript:
    actions: list

    @property
    def cost(self):
        return len(self.actions)

    def by_id(self):
        return {a.id: a for a in self.actions}


@dataclass
class Plan:
    actions: list
    digests: list
    final: cgraph.ContactGraphPlus | None = None
    expanded: int = 0

    def __len__(self):
        return len(self.actions)


@dataclass
class PlanReport:
    ok: bool
    step: int | None = None
    reason: str = ""
    clause: str | None = None


# ---------------------------------------------------------------------------
# edit script


def ged_edit_script(cg0, cgg, tol=cgraph.POSE_TOLERANCE):
    """Minimal Pick/Place/Open/Close script under the identity correspondence."""
    if set(cg0.nodes) != set(cgg.nodes):
        missing = sorted(set(cg0.nodes) ^ set(cgg.nodes))
        raise NodeSetMismatchError(f"node sets differ: {missing}")
    actions = []
    for c in sorted(set(cg0.supports) | set(cgg.supports)):
        r0, rg = cg0.supports.get(c), cgg.supports.get(c)
        if r0 is None or rg is None:
            raise NodeSetMismatchError(f"{c} lacks a supporting relation")
        if r0.same_as(rg, tol):
            continue
        if r0.parent != GRIPPER:
            actions.append(Action("Pick", f"pick:{c}", r0.parent, c, subtree=_rides(cg0, cgg, c, tol)))
        if rg.parent != GRIPPER:
            actions.append(Action("Place", f"place:{c}", rg.parent, c, surface=rg.surface,
                                  pose=rg.pose, stance=rg.stance))
    for n in sorted(set(cg0.status) | set(cgg.status)):
        s0, sg = cg0.status.get(n), cgg.status.get(n)
        if s0 != sg:
            if s0 is None or sg is None:
                raise NodeSetMismatchError(f"{n} has a status in only one graph")
            kind = "Open" if sg == "opened" else "Close"
            actions.append(Action(kind, f"{kind.lower()}:{n}", node=n))
    return EditScript(actions)


def _rides(cg0, cgg, node, tol):
    """True if some current child keeps its relation and ``node`` keeps its stance."""
    r0, rg = cg0.supports[node], cgg.supports[node]
    if r0.stance != rg.stance:
        return False
    return any(cg0.supports[c].same_as(cgg.supports[c], tol) for c in cg0.children(node))


# ---------------------------------------------------------------------------
# temporal constraints


def _access_set(cg, node, include_self):
    """Nodes with a status attribute that must be opened to reach ``node``."""
    chain = ([node] if include_self else []) + cg.ancestors(node)
    return [a for a in chain if a in cg.status]


def derive_constraints(script, cg0, cgg, extra=()):
    """Partial order over ``script``; may add swap detours and Open/Close pairs.

    Returns ``(script, constraints)`` where ``script`` is a new
    :class:`EditScript` including any inserted actions.  ``extra``
    constraints are merged in before the cycle check.
    """
    acts = {a.id: a for a in script.actions}
    cons = set()

    def add(before, after, reason):
        if before in acts and after in acts and before != after:
            cons.add(TemporalConstraint(before, after, reason))

    tol = cgraph.POSE_TOLERANCE
    swap = cg0.swap or cgg.swap
    # (b) spatial: children that cannot ride along with a moving parent
    for v in sorted(c for c, a in acts.items() if a.kind == "Pick" for c in [a.child]):
        if cg0.supports[v].parent == GRIPPER:
            continue
        flipped = cg0.supports[v].stance != cgg.supports[v].stance
        for c in cg0.children(v):
            same = cg0.supports[c].same_as(cgg.supports[c], tol)
            if same and not flipped:
                continue
            if same and flipped:
                r = cgg.supports[c]
                acts[f"pick:{c}"] = Action("Pick", f"pick:{c}", v, c)
                acts[f"place:{c}"] = Action("Place", f"place:{c}", v, c, surface=r.surface,
                                            pose=r.pose, stance=r.stance)
            add(f"pick:{c}", f"pick:{v}", "spatial")
            if swap is not None and v in [cgg.supports[c].parent, *cgg.ancestors(c)]:
                _insert_swap(acts, add, c, v, swap, cg0)
    # (a) precedence
    for c, a in list(acts.items()):
        if a.kind == "Place" and c.startswith("place:"):
            child = a.child
            add(f"pick:{child}", a.id, "precedence")
            add(f"place:{a.parent}", a.id, "precedence")
    # (c) accessibility, including Open/Close pairs the diff did not need
    needed = set()
    for a in acts.values():
        for x in _access_of(a, cg0, cgg):
            needed.add(x)
    for x in sorted(needed):
        if cg0.status.get(x) == "closed" and f"open:{x}" not in acts:
            acts[f"open:{x}"] = Action("Open", f"open:{x}", node=x)
        if cgg.status.get(x) == "closed" and f"close:{x}" not in acts:
            if cg0.status.get(x) == "closed" or f"open:{x}" in acts:
                acts[f"close:{x}"] = Action("Close", f"close:{x}", node=x)
    for a in list(acts.values()):
        for x in _access_of(a, cg0, cgg):
            add(f"open:{x}", a.id, "accessibility")
            add(a.id, f"close:{x}", "accessibility")
    for x in cgg.status:
        add(f"open:{x}", f"close:{x}", "precedence")
    for b, a, *reason in extra:
        add(b, a, reason[0] if reason else "precedence")
    _check_acyclic(acts, cons)
    return EditScript([acts[k] for k in sorted(acts)]), cons


def _insert_swap(acts, add, c, v, swap, cg0):
    put, take = f"swap-place:{c}", f"swap-pick:{c}"
    acts[put] = Action("Place", put, swap, c, surface=None, pose=None, stance=cg0.supports[c].stance)
    acts[take] = Action("Pick", take, swap, c)
    add(f"pick:{c}", put, "spatial")
    add(put, f"pick:{v}", "spatial")
    add(f"place:{v}", take, "spatial")
    add(put, take, "precedence")
    add(take, f"place:{c}", "precedence")


def _access_of(a, cg0, cgg):
    """Containers whose status gates ``a`` (initial chain for removals, goal chain for insertions)."""
    if a.kind == "Pick":
        return _access_set(cg0, a.parent, True) if a.parent in cg0.nodes else []
    if a.kind == "Place":
        g = cgg if a.id.startswith("place:") else cg0
        return _access_set(g, a.parent, True)
    if a.kind == "Open":
        return _access_set(cg0, a.node, False)
    return _access_set(cgg, a.node, False)


def _check_acyclic(acts, cons):
    ts = graphlib.TopologicalSorter({k: set() for k in acts})
    for c in cons:
        ts.add(c.after, c.before)
    try:
        ts.prepare()
    except graphlib.CycleError as exc:
        raise InconsistentGoalError(f"temporal constraints form a cycle: {exc.args[1]}") from exc


# ---------------------------------------------------------------------------
# search


@dataclass
class SearchNode:
    pending: dict  # id -> Action, not yet executed
    constraints: frozenset
    last: Action | None
    state: cgraph.ContactGraphPlus
    executed: tuple = ()
    digests: tuple = ()
    detours: int = 0


def _local_violations(before, after, action):
    """Checks on the edited node and its neighbourhood only."""
    if action.kind in ("Open", "Close"):
        return []
    out = []
    if action.kind == "Place":
        c = action.child
        sub = after.subtree(c)
        for (u, i), (v, j) in cgraph.check_penetration_free(after, sub):
            out.append(f"penetration:{u}[{i}]~{v}[{j}]")
        chain = [c, *after.ancestors(c)]
    else:
        chain = [action.parent, *after.ancestors(action.parent)]
    for n in chain:
        rel = after.supports.get(n)
        if rel is not None and rel.parent != GRIPPER:
            out.extend(cgraph.relation_violations(after, rel))
    return out


def _blockers(violations):
    out = set()
    for v in violations:
        if v.startswith("penetration:"):
            for part in v.split(":", 1)[1].split("~"):
                out.add(part.split("[")[0])
    return out


def _swap_surface(cg, swap):
    node = cg.nodes[swap]
    stance = cg.supports[swap].stance if swap in cg.supports else 0
    for s in node.usable_surfaces(stance):
        if node.surfaces[s].type == "support":
            return s
    raise PlanNotFoundError(f"swap node {swap} has no upward support surface", [])


def swap_pose(state, child, swap, pose_cfg, seed):
    """Place ``child`` (currently held) on ``swap`` via layer optimisation."""
    s = _swap_surface(state, swap)
    held = state.supports[child]
    supports = dict(state.supports)
    supports[child] = SupportingRelation(swap, child, s, None, held.stance, held.dof)
    trial = state.evolve(supports=supports)
    fixed = [k for k in trial.children(swap) if k != child]
    rng = np.random.default_rng(goalsynth.sub_seed(seed, "swap", child, len(fixed)))
    try:
        res = goalsynth.optimize_layer(trial, swap, pose_cfg, rng, fixed=fixed)
    except LayerInfeasibleError as exc:
        raise PlanNotFoundError(f"swap node {swap} cannot take {child}", [str(exc)]) from exc
    return s, res.poses[child]


def resolve_infeasible(node, action, violations, swap, pose_cfg, seed):
    """Detour the held object of a blocked ``action`` through the swap node.

    Returns ``(pending, constraints, detour_action)`` for the amended search
    node, or None when no pending Pick could ever clear the blockage.
    """
    if swap is None:
        return None
    c = action.child
    pending_picks = {a.child for a in node.pending.values() if a.kind == "Pick"}
    blockers = sorted((_blockers(violations) - {c}) & pending_picks)
    if not blockers:
        return None
    k = node.detours
    put, take, retry = f"detour-place:{c}#{k}", f"detour-pick:{c}#{k}", f"{action.id}#retry{k}"
    s, pose = swap_pose(node.state, c, swap, pose_cfg, seed)
    stance = node.state.supports[c].stance
    detour = Action("Place", put, swap, c, surface=s, pose=tuple(pose), stance=stance)
    pending = dict(node.pending)
    del pending[action.id]
    pending[take] = Action("Pick", take, swap, c)
    pending[retry] = replace(action, id=retry)
    cons = set()
    for tc in node.constraints:
        b = retry if tc.before == action.id else tc.before
        a = retry if tc.after == action.id else tc.after
        cons.add(TemporalConstraint(b, a, tc.reason))
    cons.add(TemporalConstraint(take, retry, "precedence"))
    for b in blockers:
        pick = next(a.id for a in pending.values() if a.kind == "Pick" and a.child == b)
        cons.add(TemporalConstraint(pick, take, "spatial"))
    return pending, frozenset(cons), detour


def park_held(node, swap, pose_cfg, seed):
    """Set the held object aside on the swap node while its Place still waits.

    Returns a child :class:`SearchNode`, or None when nothing is held or the
    held object's Place is already unblocked.
    """
    state = node.state
    c = state.held
    if swap is None or c is None:
        return None
    place = next((a for a in node.pending.values() if a.kind == "Place" and a.child == c), None)
    if place is None:
        return None
    done = {a.id for a in node.executed}
    waiting = sorted({tc.before for tc in node.constraints if tc.after == place.id and tc.before not in done})
    if not waiting:
        return None
    k = node.detours
    put, take = f"park-place:{c}#{k}", f"park-pick:{c}#{k}"
    s, pose = swap_pose(state, c, swap, pose_cfg, seed)
    detour = Action("Place", put, swap, c, surface=s, pose=tuple(pose), stance=state.supports[c].stance)
    after = cgraph.apply_action(state, detour)
    if _local_violations(state, after, detour):
        return None
    pending = dict(node.pending)
    pending[take] = Action("Pick", take, swap, c, subtree=bool(after.children(c)))
    cons = set(node.constraints)
    cons.add(TemporalConstraint(take, place.id, "precedence"))
    cons.update(TemporalConstraint(w, take, "spatial") for w in waiting)
    return SearchNode(pending, frozenset(cons), detour, after, node.executed + (detour,),
                      node.digests + (cgraph.digest(after),), node.detours + 1)


def _successors(constraints):
    out = {}
    for tc in constraints:
        out.setdefault(tc.before, set()).add(tc.after)
    return out


def _candidates(node, cgg):
    done = set(a.id for a in node.executed)
    preds = {}
    for tc in node.constraints:
        if tc.before not in done:
            preds.setdefault(tc.after, set()).add(tc.before)
    succ = _successors(node.constraints)

    def depth(a):
        t = a.target
        return cgg.depth(t) if t in cgg.nodes and (t == cgg.root or t in cgg.supports) else 0

    ready = [a for k, a in node.pending.items() if not preds.get(k)]
    ready.sort(key=lambda a: (len(succ.get(a.id, set()) - done), depth(a), a.id))
    return ready


def _concretize(state, action, swap, pose_cfg, seed):
    if action.kind == "Place" and action.pose is None:
        s, pose = swap_pose(state, action.child, action.parent, pose_cfg, seed)
        return replace(action, surface=s, pose=tuple(pose))
    return action


def topo_plan(script, constraints, cg0, cgg=None, swap_node=None, pose_cfg=None, seed=0, budget=20000):
    """Depth-first topological sort with per-step simulation.

    A first pass orders the script as given; only when that search is
    exhausted does a second pass allow swap-node detours for blocked
    placements.  Returns a :class:`Plan`.  Raises
    :class:`PlanNotFoundError` carrying the deepest failure trace when both
    passes fail.
    """
    swap = swap_node if swap_node is not None else cg0.swap
    pose_cfg = pose_cfg or goalsynth.PoseOptConfig(max_iters=400, restarts=4)
    cgg = cgg if cgg is not None else cg0
    deepest = {"depth": -1, "trace": []}
    for detours in (False, True):
        if detours and swap is None:
            break
        found = _search(script, constraints, cg0, cgg, swap, pose_cfg, seed, budget, detours, deepest)
        if found is not None:
            return found
    raise PlanNotFoundError("no consistent ordering found", deepest["trace"])


def _search(script, constraints, cg0, cgg, swap, pose_cfg, seed, budget, detours, deepest):
    root = SearchNode({a.id: a for a in script.actions}, frozenset(constraints), None, cg0)
    seen = set()
    expanded = 0

    def fail(node, msg):
        if len(node.executed) > deepest["depth"]:
            deepest["depth"] = len(node.executed)
            deepest["trace"] = [str(a) for a in node.executed] + [msg]

    stack = [root]
    while stack:
        node = stack.pop()
        if not node.pending:
            if cgg is None or cgraph.same_state(node.state, cgg):
                return Plan(list(node.executed), list(node.digests), node.state, expanded)
            fail(node, "final state differs from goal")
            continue
        key = (frozenset(a.id for a in node.executed), frozenset(node.pending), cgraph.digest(node.state))
        if key in seen:
            continue
        seen.add(key)
        expanded += 1
        if expanded > budget:
            break
        children = []
        for cand in _candidates(node, cgg):
            try:
                act = _concretize(node.state, cand, swap, pose_cfg, seed)
                after = cgraph.apply_action(node.state, act)
            except ActionPreconditionError as exc:
                fail(node, f"{cand}: {exc.clause}")
                continue
            except PlanNotFoundError as exc:
                fail(node, f"{cand}: {exc}")
                continue
            bad = _local_violations(node.state, after, act)
            if bad:
                fail(node, f"{cand}: {bad[0]}")
                if detours and act.kind == "Place":
                    try:
                        fix = resolve_infeasible(node, act, bad, swap, pose_cfg, seed)
                    except PlanNotFoundError as exc:
                        fail(node, str(exc))
                        fix = None
                    if fix is not None:
                        pending, cons, detour = fix
                        st = cgraph.apply_action(node.state, detour)
                        if not _local_violations(node.state, st, detour):
                            children.append(SearchNode(pending, cons, detour, st, node.executed + (detour,),
                                                       node.digests + (cgraph.digest(st),), node.detours + 1))
                continue
            pending = dict(node.pending)
            del pending[cand.id]
            children.append(SearchNode(pending, node.constraints, act, after, node.executed + (act,),
                                       node.digests + (cgraph.digest(after),), node.detours))
        if detours and node.state.held is not None:
            try:
                parked = park_held(node, swap, pose_cfg, seed)
            except PlanNotFoundError as exc:
                fail(node, str(exc))
                parked = None
            if parked is not None:
                children.append(parked)
        # best candidate explored first
        stack.extend(reversed(children))
    return None


def plan(cg0, cgg, extra=(), pose_cfg=None, seed=0, budget=20000):
    """Edit script, constraints and ordering in one call."""
    script = ged_edit_script(cg0, cgg)
    script, cons = derive_constraints(script, cg0, cgg, extra)
    return topo_plan(script, cons, cg0, cgg, cg0.swap, pose_cfg, seed, budget)


def validate_plan(plan, cg0, cgg, tol=cgraph.POSE_TOLERANCE):
    """Replay ``plan`` with full validation after every step."""
    actions = plan.actions if isinstance(plan, Plan) else list(plan)
    digests = plan.digests if isinstance(plan, Plan) else None
    state = cg0
    for i, a in enumerate(actions):
        try:
            state = cgraph.apply_action(state, a)
        except ActionPreconditionError as exc:
            return PlanReport(False, i, f"{a}: {exc}", exc.clause)
        bad = cgraph.validate(state)
        if bad:
            return PlanReport(False, i, f"{a}: {bad[0]}", "validity")
        if digests is not None and i < len(digests) and digests[i] != cgraph.digest(state):
            return PlanReport(False, i, f"{a}: digest mismatch", "digest")
    diff = cgraph.state_differences(state, cgg, tol)
    if diff:
        return PlanReport(False, len(actions), f"final state differs: {diff[0]}", "goal")
    return PlanReport(True)
