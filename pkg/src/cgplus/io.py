"""JSON scene and plan files.

Both formats carry ``schema_version`` and are written with sorted keys so
that equal objects serialise to identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import cgraph, geom
from .cgraph import GRIPPER, Action, ContactGraphPlus, ProximalRelation, SceneEntityNode, Surface, SupportingRelation
from .errors import CGPlusError, SceneFormatError

SCHEMA_VERSION = 1


def _f(x):
    return float(x) + 0.0


def _arr(a):
    return [[_f(v) for v in row] for row in np.asarray(a, dtype=float)]


def dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# scene serialisation


def primitive_to_dict(p):
    dims = _arr(p.dims) if p.kind == "convex-mesh" else [_f(d) for d in p.dims]
    return {"kind": p.kind, "dims": dims, "local_pose": _arr(p.local_pose), "mass": _f(p.mass)}


def node_to_dict(n):
    return {
        "id": n.instance_id,
        "label": n.semantic_label,
        "movable": bool(n.movable),
        "geometry": [primitive_to_dict(p) for p in n.geometry],
        "bbox": None if n.bbox is None else {
            "center": [_f(v) for v in n.bbox.center],
            "half_extents": [_f(v) for v in n.bbox.half_extents],
            "rotation": _arr(n.bbox.rotation),
        },
        "surfaces": [
            {
                "type": s.type,
                "vertices": _arr(s.region.vertices),
                "origin": [_f(v) for v in s.region.origin],
                "normal": [_f(v) for v in s.region.normal],
            }
            for s in n.surfaces
        ],
        "stances": [_arr(R) for R in n.stances],
    }


def relation_to_dict(r):
    return {
        "parent": r.parent,
        "child": r.child,
        "surface": int(r.surface),
        "pose": None if r.pose is None else [_f(v) for v in r.pose],
        "stance": int(r.stance),
        "dof": int(r.dof),
    }


def scene_to_dict(cg, goal_constraints=()):
    return {
        "schema_version": SCHEMA_VERSION,
        "root": cg.root,
        "entities": [node_to_dict(cg.nodes[k]) for k in sorted(cg.nodes)],
        "supports": [relation_to_dict(cg.supports[k]) for k in sorted(cg.supports)],
        "proximal": [[list(p.a), list(p.b)] for p in sorted(cg.proximal)],
        "status": dict(sorted(cg.status.items())),
        "swap": cg.swap,
        "goal_constraints": {"above": [list(p) for p in goal_constraints]},
    }


def dump_scene(cg, path, goal_constraints=()):
    Path(path).write_text(dumps(scene_to_dict(cg, goal_constraints)))


# ---------------------------------------------------------------------------
# scene parsing


def _get(d, key, where, kind=None, default=KeyError):
    if not isinstance(d, dict):
        raise SceneFormatError(f"{where}: expected an object")
    if key not in d:
        if default is KeyError:
            raise SceneFormatError(f"{where}: missing field {key!r}")
        return default
    v = d[key]
    if kind is not None and v is not None and not isinstance(v, kind):
        raise SceneFormatError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return v


def _node_from_dict(d, where):
    nid = _get(d, "id", where, str)
    where = f"entities[{nid}]"
    try:
        geometry = []
        for i, g in enumerate(_get(d, "geometry", where, list, [])):
            gw = f"{where}.geometry[{i}]"
            geometry.append(geom.GeometryPrimitive(
                _get(g, "kind", gw, str),
                _get(g, "dims", gw, list),
                np.asarray(_get(g, "local_pose", gw, list, np.eye(4).tolist()), dtype=float).reshape(4, 4),
                float(_get(g, "mass", gw, (int, float), 1.0)),
            ))
        surfaces = []
        for i, s in enumerate(_get(d, "surfaces", where, list, [])):
            sw = f"{where}.surfaces[{i}]"
            region = geom.Region2D(
                _get(s, "vertices", sw, list),
                np.asarray(_get(s, "origin", sw, list, [0.0, 0.0, 0.0]), dtype=float),
                np.asarray(_get(s, "normal", sw, list, [0.0, 0.0, 1.0]), dtype=float),
            )
            surfaces.append(Surface(region, _get(s, "type", sw, str)))
        bb = _get(d, "bbox", where, dict, None)
        bbox = None if bb is None else geom.OrientedBox(
            _get(bb, "center", f"{where}.bbox", list),
            _get(bb, "half_extents", f"{where}.bbox", list),
            _get(bb, "rotation", f"{where}.bbox", list, np.eye(3).tolist()),
        )
        stances = _get(d, "stances", where, list, [np.eye(3).tolist()])
        return SceneEntityNode(nid, _get(d, "label", where, str, nid), tuple(geometry), bbox,
                               tuple(surfaces), tuple(np.asarray(R, dtype=float) for R in stances),
                               bool(_get(d, "movable", where, bool, True)))
    except SceneFormatError:
        raise
    except (CGPlusError, ValueError, TypeError) as exc:
        raise SceneFormatError(f"{where}: {exc}") from exc


def scene_from_dict(d):
    """Graph and goal constraints from a parsed scene document."""
    version = _get(d, "schema_version", "scene", int)
    if version != SCHEMA_VERSION:
        raise SceneFormatError(f"scene: unsupported schema_version {version}")
    root = _get(d, "root", "scene", str, "scene")
    nodes = {}
    for i, e in enumerate(_get(d, "entities", "scene", list, [])):
        n = _node_from_dict(e, f"entities[{i}]")
        if n.instance_id in nodes:
            raise SceneFormatError(f"entities[{i}]: duplicate id {n.instance_id!r}")
        nodes[n.instance_id] = n
    if root not in nodes:
        nodes[root] = SceneEntityNode(root, root, movable=False)
    supports = {}
    for i, r in enumerate(_get(d, "supports", "scene", list, [])):
        w = f"supports[{i}]"
        parent, child = _get(r, "parent", w, str), _get(r, "child", w, str)
        for ref, name in ((parent, "parent"), (child, "child")):
            if ref not in nodes and not (name == "parent" and ref == GRIPPER):
                raise SceneFormatError(f"{w}.{name}: unknown node {ref!r}")
        if child in supports:
            raise SceneFormatError(f"{w}: {child!r} already has a parent")
        pose = _get(r, "pose", w, list, None)
        if pose is not None and len(pose) != 3:
            raise SceneFormatError(f"{w}.pose: expected [x, y, yaw]")
        surface = _get(r, "surface", w, int, 0)
        if parent != GRIPPER and not 0 <= surface < len(nodes[parent].surfaces):
            raise SceneFormatError(f"{w}.surface: {parent!r} has no surface {surface}")
        try:
            supports[child] = SupportingRelation(parent, child, surface, pose,
                                                 _get(r, "stance", w, int, 0), _get(r, "dof", w, int, 3))
        except ValueError as exc:
            raise SceneFormatError(f"{w}: {exc}") from exc
    proximal = set()
    for i, p in enumerate(_get(d, "proximal", "scene", list, [])):
        try:
            (a, ai), (b, bi) = p
            for ref, k in ((a, ai), (b, bi)):
                if ref not in nodes or not 0 <= int(k) < len(nodes[ref].geometry):
                    raise SceneFormatError(f"proximal[{i}]: unknown primitive {ref}[{k}]")
            proximal.add(ProximalRelation((a, int(ai)), (b, int(bi))))
        except (TypeError, ValueError) as exc:
            raise SceneFormatError(f"proximal[{i}]: {exc}") from exc
    status = _get(d, "status", "scene", dict, {})
    for k, v in status.items():
        if k not in nodes:
            raise SceneFormatError(f"status: unknown node {k!r}")
        if v not in cgraph.STATUS_VALUES:
            raise SceneFormatError(f"status[{k}]: invalid value {v!r}")
    swap = _get(d, "swap", "scene", str, None)
    if swap is not None and swap not in nodes:
        raise SceneFormatError(f"swap: unknown node {swap!r}")
    above = []
    gc = _get(d, "goal_constraints", "scene", dict, {}) or {}
    for i, pair in enumerate(gc.get("above", [])):
        if len(pair) != 2 or any(x not in nodes for x in pair):
            raise SceneFormatError(f"goal_constraints.above[{i}]: bad pair {pair!r}")
        above.append(tuple(pair))
    try:
        cg = ContactGraphPlus(root, nodes, supports, frozenset(proximal), dict(status), swap)
        cg.check_tree()
    except CGPlusError as exc:
        raise SceneFormatError(f"scene: {exc}") from exc
    return cg, above


def load_scene(path, check_physics=True):
    """Parse a scene file; returns ``(graph, goal_constraints)``.

    Raises :class:`SceneFormatError` naming the offending line or field.  When
    every relation carries a pose and ``check_physics`` is set, the graph must
    also pass full validation; the violations are attached as ``.violations``.
    """
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    cg, above = scene_from_dict(d)
    if check_physics and all(r.pose is not None for r in cg.supports.values()):
        bad = cgraph.validate(cg)
        if bad:
            err = SceneFormatError(f"{path}: scene violates physical constraints: {bad[0]}")
            err.violations = bad
            raise err
    return cg, above


# ---------------------------------------------------------------------------
# plans


def action_to_dict(a):
    return {
        "kind": a.kind,
        "id": a.id,
        "parent": a.parent,
        "child": a.child,
        "node": a.node,
        "surface": a.surface,
        "pose": None if a.pose is None else [_f(v) for v in a.pose],
        "stance": int(a.stance),
        "subtree": bool(a.subtree),
    }


def action_from_dict(d, where, nodes=None):
    try:
        a = Action(
            _get(d, "kind", where, str),
            _get(d, "id", where, str),
            _get(d, "parent", where, str, None),
            _get(d, "child", where, str, None),
            _get(d, "node", where, str, None),
            _get(d, "surface", where, int, None),
            _get(d, "pose", where, list, None),
            _get(d, "stance", where, int, 0),
            _get(d, "subtree", where, bool, False),
        )
    except ValueError as exc:
        raise SceneFormatError(f"{where}: {exc}") from exc
    if nodes is not None:
        for ref in (a.parent, a.child, a.node):
            if ref is not None and ref not in nodes:
                raise SceneFormatError(f"{where}: unknown node {ref!r}")
    return a


def plan_to_dict(plan, goal, meta=None):
    return {
        "schema_version": SCHEMA_VERSION,
        "actions": [action_to_dict(a) for a in plan.actions],
        "digests": list(plan.digests),
        "goal": scene_to_dict(goal),
        "meta": meta or {},
    }


def dump_plan(plan, goal, path, meta=None):
    Path(path).write_text(dumps(plan_to_dict(plan, goal, meta)))


def plan_from_dict(d, nodes=None):
    """``(actions, digests, goal_graph, meta)`` from a parsed plan document."""
    version = _get(d, "schema_version", "plan", int)
    if version != SCHEMA_VERSION:
        raise SceneFormatError(f"plan: unsupported schema_version {version}")
    goal, _ = scene_from_dict(_get(d, "goal", "plan", dict))
    nodes = goal.nodes if nodes is None else nodes
    actions = [action_from_dict(a, f"actions[{i}]", nodes) for i, a in enumerate(_get(d, "actions", "plan", list))]
    digests = [str(x) for x in _get(d, "digests", "plan", list, [])]
    return actions, digests, goal, _get(d, "meta", "plan", dict, {})


def load_plan(path, nodes=None):
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return plan_from_dict(d, nodes)
