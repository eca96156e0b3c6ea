"""Augmented contact graph: parse tree of supporting relations, proximal
edges and per-node attributes, plus state validation and action semantics.

Graphs are treated as immutable values.  Every state transition goes through
:func:`apply_action`, which returns a new graph.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import combinations

import numpy as np

from . import geom
from .errors import (
    ActionPreconditionError,
    GraphIntegrityError,
    InvalidGeometryError,
    NoContactError,
)
from .geom import (
    GeometryPrimitive,
    OrientedBox,
    Region2D,
    make_transform,
    rot_z,
)

GRIPPER = "__gripper__"
GRIPPER_POSE = make_transform(translation=[0.0, 0.0, 100.0])
SURFACE_TYPES = ("none", "support", "contain")
STATUS_VALUES = ("closed", "opened")
ACTION_KINDS = ("Pick", "Place", "Open", "Close")
POSE_TOLERANCE = 1e-6
FOOTPRINT_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class Surface:
    """One element of a node's supporting attribute: a planar region and its type."""

    region: Region2D
    type: str = "support"

    def __post_init__(self):
        if self.type not in SURFACE_TYPES:
            raise ValueError(f"unknown surface type {self.type!r}")


@dataclass(frozen=True, eq=False)
class SceneEntityNode:
    instance_id: str
    semantic_label: str
    geometry: tuple = ()
    bbox: OrientedBox | None = None
    surfaces: tuple = ()
    stances: tuple = (np.eye(3),)
    movable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "geometry", tuple(self.geometry))
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        stances = tuple(np.asarray(R, dtype=float).reshape(3, 3) for R in self.stances) or (np.eye(3),)
        object.__setattr__(self, "stances", stances)
        if self.bbox is None and self.geometry:
            pts = np.vstack([p.world_vertices(np.eye(4)) for p in self.geometry])
            object.__setattr__(self, "bbox", OrientedBox.from_points(pts))

    @property
    def mass(self):
        return sum(p.mass for p in self.geometry)

    def usable_surfaces(self, stance=0):
        """Indices of surfaces with a type other than ``none`` facing up in ``stance``."""
        R = self.stances[stance]
        return [i for i, s in enumerate(self.surfaces) if s.type != "none" and geom.is_up(s.region.normal, R)]

    def stance_for_surface(self, index):
        """First stance that turns surface ``index`` upwards, or None."""
        n = self.surfaces[index].region.normal
        for k, R in enumerate(self.stances):
            if geom.is_up(n, R):
                return k
        return None


@lru_cache(maxsize=None)
def _base_offset(node, stance):
    """Lowest z of the node's geometry after applying ``stance`` rotation."""
    if not node.geometry:
        return 0.0
    T = make_transform(node.stances[stance])
    down = np.array([0.0, 0.0, -1.0])
    return min(geom._Placed(p, T).support(down)[2] for p in node.geometry)


@dataclass(frozen=True)
class SupportingRelation:
    """Directed parent -> child edge.  ``pose`` is ``(x, y, yaw)`` in the
    parent-surface frame; ``None`` means not yet synthesised (provisionally the
    surface centroid)."""

    parent: str
    child: str
    surface: int
    pose: tuple | None = None
    stance: int = 0
    dof: int = 3

    def __post_init__(self):
        if self.pose is not None:
            object.__setattr__(self, "pose", tuple(float(x) for x in self.pose))
        if not 0 <= self.dof <= 3:
            raise ValueError("dof must be in 0..3")

    def same_as(self, other, tol=POSE_TOLERANCE):
        if other is None:
            return False
        if (self.parent, self.surface, self.stance) != (other.parent, other.surface, other.stance):
            return False
        if self.pose is None or other.pose is None:
            return self.pose is None and other.pose is None
        dx = np.subtract(self.pose[:2], other.pose[:2])
        dyaw = (self.pose[2] - other.pose[2] + np.pi) % (2 * np.pi) - np.pi
        return bool(np.all(np.abs(dx) <= tol) and abs(dyaw) <= tol)


@dataclass(frozen=True, order=True)
class ProximalRelation:
    """Undirected pair of primitive references ``(node_id, primitive_index)``."""

    a: tuple
    b: tuple

    def __post_init__(self):
        a, b = tuple(self.a), tuple(self.b)
        if a[0] == b[0]:
            raise ValueError("proximal relation endpoints must belong to distinct nodes")
        if b < a:
            a, b = b, a
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class Action:
    kind: str
    id: str
    parent: str | None = None
    child: str | None = None
    node: str | None = None
    surface: int | None = None
    pose: tuple | None = None
    stance: int = 0
    subtree: bool = False

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.pose is not None:
            object.__setattr__(self, "pose", tuple(float(x) for x in self.pose))

    @property
    def target(self):
        return self.node if self.kind in ("Open", "Close") else self.child

    def __str__(self):
        if self.kind in ("Open", "Close"):
            return f"{self.kind}({self.node})"
        return f"{self.kind}({self.parent}, {self.child})"


@dataclass(frozen=True, eq=False)
class ContactGraphPlus:
    root: str
    nodes: dict
    supports: dict
    proximal: frozenset = frozenset()
    status: dict = field(default_factory=dict)
    swap: str | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.root not in self.nodes:
            raise GraphIntegrityError("root node missing")
        for child, rel in self.supports.items():
            if child != rel.child:
                raise GraphIntegrityError(f"relation key {child} != child {rel.child}")
            if child not in self.nodes:
                raise GraphIntegrityError(f"relation child {child} is not a node")
            if rel.parent != GRIPPER and rel.parent not in self.nodes:
                raise GraphIntegrityError(f"relation parent {rel.parent} of {child} is not a node")
        for key in self.status:
            if key not in self.nodes:
                raise GraphIntegrityError(f"status attribute on unknown node {key}")
        for p in self.proximal:
            for ref in (p.a, p.b):
                if ref[0] not in self.nodes or not 0 <= ref[1] < len(self.nodes[ref[0]].geometry):
                    raise GraphIntegrityError(f"proximal reference {ref} is invalid")
        if self.swap is not None and self.swap not in self.nodes:
            raise GraphIntegrityError("swap node missing")

    def evolve(self, **changes):
        changes.setdefault("_cache", {})
        return replace(self, **changes)

    # structure -------------------------------------------------------------
    @property
    def held(self):
        for child, rel in self.supports.items():
            if rel.parent == GRIPPER:
                return child
        return None

    def parent(self, node):
        rel = self.supports.get(node)
        return None if rel is None else rel.parent

    def children(self, node):
        key = ("children",)
        if key not in self._cache:
            kids = {}
            for c in sorted(self.supports):
                kids.setdefault(self.supports[c].parent, []).append(c)
            self._cache[key] = kids
        return list(self._cache[key].get(node, ()))

    def subtree(self, node):
        out, stack = [], [node]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(reversed(self.children(n)))
        return out

    def ancestors(self, node):
        out, seen = [], {node}
        p = self.parent(node)
        while p is not None and p != GRIPPER:
            if p in seen:
                raise GraphIntegrityError(f"cycle through {p}")
            seen.add(p)
            out.append(p)
            p = self.parent(p)
        return out

    def depth(self, node):
        return len(self.ancestors(node))

    def object_ids(self):
        return sorted(n for n in self.nodes if n != self.root)

    def check_tree(self):
        """Raise unless every non-root node reaches the root (or gripper) without cycles."""
        if self.root in self.supports:
            raise GraphIntegrityError("root must not have a parent")
        for n in self.nodes:
            cur, seen = n, set()
            while cur != self.root:
                if cur in seen:
                    raise GraphIntegrityError(f"cycle through {cur}")
                seen.add(cur)
                rel = self.supports.get(cur)
                if rel is None:
                    raise GraphIntegrityError(f"node {cur} is detached")
                if rel.parent == GRIPPER:
                    break
                cur = rel.parent

    def __repr__(self):
        return f"ContactGraphPlus(root={self.root!r}, {len(self.nodes)} nodes, {len(self.supports)} relations)"


# ---------------------------------------------------------------------------
# poses


def surface_transform(node, surface_index):
    return node.surfaces[surface_index].region.frame()


def relation_transform(cg, rel):
    """Child frame relative to the parent frame."""
    parent = cg.nodes[rel.parent]
    child = cg.nodes[rel.child]
    surf = parent.surfaces[rel.surface]
    if rel.pose is None:
        c = surf.region.centroid
        x, y, yaw = c[0], c[1], 0.0
    else:
        x, y, yaw = rel.pose
    stance = child.stances[rel.stance]
    local = make_transform(rot_z(yaw) @ stance, [x, y, -_base_offset(child, rel.stance)])
    return surf.region.frame() @ local


def world_pose(cg, node):
    """Composition of relative poses along the root-to-node path."""
    key = ("pose", node)
    cached = cg._cache.get(key)
    if cached is not None:
        return cached
    if node == cg.root:
        T = np.eye(4)
    elif node not in cg.nodes:
        raise GraphIntegrityError(f"unknown node {node}")
    else:
        rel = cg.supports.get(node)
        if rel is None:
            raise GraphIntegrityError(f"node {node} is detached")
        if rel.parent == GRIPPER:
            stance = cg.nodes[node].stances[rel.stance]
            T = GRIPPER_POSE @ make_transform(stance)
        else:
            if node in cg.ancestors(rel.parent) or rel.parent == node:
                raise GraphIntegrityError(f"cycle at {node}")
            T = world_pose(cg, rel.parent) @ relation_transform(cg, rel)
    cg._cache[key] = T
    return T


def world_bbox(cg, node):
    return cg.nodes[node].bbox.transformed(world_pose(cg, node))


def surface_world_frame(cg, node, surface_index):
    return world_pose(cg, node) @ surface_transform(cg.nodes[node], surface_index)


# ---------------------------------------------------------------------------
# physical checks


@lru_cache(maxsize=None)
def _local_vertices(node):
    if not node.geometry:
        raise InvalidGeometryError(f"{node.instance_id} has no geometry")
    return np.vstack([geom.transform_points(p.local_pose, p.vertices_local()) for p in node.geometry])


@lru_cache(maxsize=65536)
def _base_hull_index(node, zrow):
    """Indices of the local vertices spanning the lowest face for a given
    gravity row of the node's rotation.  The base set only depends on that
    row, so yaw and translation reuse the same hull."""
    pts = _local_vertices(node)
    z = pts @ np.array(zrow)
    base = np.flatnonzero(z <= z.min() + FOOTPRINT_TOLERANCE)
    xy = pts[base] @ geom.plane_basis(zrow)[:, :2]
    hull = geom.convex_hull_2d(xy).vertices
    near = np.linalg.norm(xy[None, :, :] - hull[:, None, :], axis=2).argmin(axis=1)
    return tuple(int(base[k]) for k in near)


def footprint_in_frame(cg, node, T_frame_inv):
    """Convex contact footprint of ``node`` expressed in another frame's plane coords."""
    T = T_frame_inv @ world_pose(cg, node)
    n = cg.nodes[node]
    idx = _base_hull_index(n, tuple(np.round(T[2, :3], 12) + 0.0))
    pts = geom.transform_points(T, _local_vertices(n)[list(idx)])[:, :2]
    return geom.convex_polygon(pts)


def contact_overlap(cg, rel):
    """Overlap hull of the parent surface and child footprint in surface coords."""
    Ts = surface_world_frame(cg, rel.parent, rel.surface)
    if not geom.is_up(Ts[:3, 2]):
        raise NoContactError("supporting surface does not face up")
    Tinv = geom.invert_transform(Ts)
    region = geom.planar_copy(cg.nodes[rel.parent].surfaces[rel.surface].region)
    try:
        foot = footprint_in_frame(cg, rel.child, Tinv)
    except InvalidGeometryError as exc:
        raise NoContactError(str(exc)) from exc
    return geom.overlap_region(region, foot), region, Tinv


def subtree_com_in_frame(cg, node, Tinv, plane):
    items = [(p, Tinv @ world_pose(cg, n)) for n in cg.subtree(node) for p in cg.nodes[n].geometry]
    return geom.project_com(items, plane)


def check_stable(cg, rel):
    """Subtree centre of mass projects strictly inside the contact overlap hull."""
    if isinstance(rel, str):
        rel = cg.supports[rel]
    try:
        overlap, region, Tinv = contact_overlap(cg, rel)
    except NoContactError:
        return False
    com = subtree_com_in_frame(cg, rel.child, Tinv, region)
    return geom.sdf2d_eval(overlap, com) < 0


def check_contain(cg, rel):
    """Stable support plus the parent box enclosing every subtree box."""
    if isinstance(rel, str):
        rel = cg.supports[rel]
    return check_stable(cg, rel) and _enclosed(cg, rel)


def _enclosed(cg, rel):
    parent_box = world_bbox(cg, rel.parent)
    return geom.union_bbox_contained(parent_box, [world_bbox(cg, n) for n in cg.subtree(rel.child)])


def collision_pairs(cg, nodes=None):
    """Primitive pairs subject to non-penetration.

    Siblings sharing a parent surface plus declared proximal pairs.  With
    ``nodes`` given, only pairs touching one of them are returned.
    """
    held = set(cg.subtree(cg.held)) if cg.held else set()
    groups = {}
    for child, rel in cg.supports.items():
        if rel.parent == GRIPPER or child in held:
            continue
        groups.setdefault((rel.parent, rel.surface), []).append(child)
    pairs = set()
    for members in groups.values():
        for u, v in combinations(sorted(members), 2):
            for i in range(len(cg.nodes[u].geometry)):
                for j in range(len(cg.nodes[v].geometry)):
                    pairs.add(((u, i), (v, j)))
    for p in cg.proximal:
        if p.a[0] in held or p.b[0] in held:
            continue
        pairs.add((p.a, p.b))
    if nodes is not None:
        nodes = set(nodes)
        pairs = {p for p in pairs if p[0][0] in nodes or p[1][0] in nodes}
    return sorted(pairs)


def pair_distance(cg, pair, cutoff=None):
    """Signed distance of a primitive pair; AABB pre-test returns the gap
    lower bound when it already exceeds ``cutoff``."""
    (u, i), (v, j) = pair
    pu, pv = cg.nodes[u].geometry[i], cg.nodes[v].geometry[j]
    Tu, Tv = world_pose(cg, u), world_pose(cg, v)
    if cutoff is not None:
        gap = geom.aabb_gap(geom.world_aabb(pu, Tu), geom.world_aabb(pv, Tv))
        if gap > cutoff:
            return gap
    return geom.signed_distance3d(pu, Tu, pv, Tv, cutoff)


def check_penetration_free(cg, nodes=None):
    """All collision-set pairs whose signed distance is <= 0."""
    return [p for p in collision_pairs(cg, nodes) if pair_distance(cg, p, cutoff=0.0) <= 0.0]


def relation_violations(cg, rel):
    """Reasons a single relation fails stability or containment (empty if valid)."""
    surf = cg.nodes[rel.parent].surfaces[rel.surface]
    out = []
    if not check_stable(cg, rel):
        out.append(f"unstable:{rel.parent}->{rel.child}")
    elif surf.type == "contain" and not _enclosed(cg, rel):
        out.append(f"uncontained:{rel.parent}->{rel.child}")
    return out


def validate(cg, nodes=None):
    """Conjunction of non-penetration, stable support and containment.

    Returns a list of violation strings (empty when the state is valid).
    Held objects are skipped.
    """
    cg.check_tree()
    held = set(cg.subtree(cg.held)) if cg.held else set()
    out = []
    for child in sorted(cg.supports):
        rel = cg.supports[child]
        if child in held or (nodes is not None and child not in nodes):
            continue
        node = cg.nodes[rel.parent]
        if not 0 <= rel.surface < len(node.surfaces) or node.surfaces[rel.surface].type == "none":
            out.append(f"bad-surface:{rel.parent}->{child}")
            continue
        out.extend(relation_violations(cg, rel))
    for (u, i), (v, j) in check_penetration_free(cg, nodes):
        out.append(f"penetration:{u}[{i}]~{v}[{j}]")
    return out


def is_accessible(cg, node):
    """No ancestor along the parent chain holds status ``closed``."""
    return all(cg.status.get(a) != "closed" for a in cg.ancestors(node))


# ---------------------------------------------------------------------------
# actions


def _fail(message, clause):
    raise ActionPreconditionError(message, clause)


def apply_action(cg, action):
    """Return the graph after ``action``; the input is left untouched."""
    k = action.kind
    if k == "Pick":
        c = action.child
        rel = cg.supports.get(c)
        if rel is None or rel.parent != action.parent:
            _fail(f"{c} is not supported by {action.parent}", "relation")
        if cg.held is not None:
            _fail(f"hand already holds {cg.held}", "hand-empty")
        if not cg.nodes[c].movable:
            _fail(f"{c} is fixed", "movable")
        if not is_accessible(cg, c):
            _fail(f"{c} is inside a closed container", "accessible")
        if cg.children(c) and not action.subtree:
            _fail(f"{c} still supports {cg.children(c)}", "leaf")
        supports = dict(cg.supports)
        supports[c] = SupportingRelation(GRIPPER, c, -1, None, rel.stance, rel.dof)
        return cg.evolve(supports=supports)
    if k == "Place":
        c, p = action.child, action.parent
        if cg.held != c:
            _fail(f"{c} is not held", "held")
        if p not in cg.nodes or p in cg.subtree(c):
            _fail(f"cannot place {c} on {p}", "cycle")
        if not is_accessible(cg, p) or cg.status.get(p) == "closed":
            _fail(f"{p} is not accessible", "accessible")
        surfaces = cg.nodes[p].surfaces
        if action.surface is None or not 0 <= action.surface < len(surfaces) or surfaces[action.surface].type == "none":
            _fail(f"{p} has no usable surface {action.surface}", "surface")
        if not geom.is_up(surface_world_frame(cg, p, action.surface)[:3, 2]):
            _fail(f"surface {action.surface} of {p} does not face up", "surface-up")
        if action.pose is None:
            _fail("place needs a concrete pose", "pose")
        if not 0 <= action.stance < len(cg.nodes[c].stances):
            _fail(f"{c} has no stance {action.stance}", "stance")
        supports = dict(cg.supports)
        supports[c] = SupportingRelation(p, c, action.surface, action.pose, action.stance, cg.supports[c].dof)
        return cg.evolve(supports=supports)
    v = action.node
    if v not in cg.status:
        _fail(f"{v} has no status attribute", "status")
    want, cur = ("opened", "closed") if k == "Open" else ("closed", "opened")
    if cg.status[v] != cur:
        _fail(f"{v} is already {cg.status[v]}", "status")
    if not is_accessible(cg, v):
        _fail(f"{v} is inside a closed container", "accessible")
    status = dict(cg.status)
    status[v] = want
    return cg.evolve(status=status)


def inverse_action(cg, action):
    """Action undoing ``action`` when applied to the state after it."""
    if action.kind == "Open":
        return Action("Close", f"inv:{action.id}", node=action.node)
    if action.kind == "Close":
        return Action("Open", f"inv:{action.id}", node=action.node)
    if action.kind == "Pick":
        rel = cg.supports[action.child]
        return Action("Place", f"inv:{action.id}", rel.parent, rel.child, surface=rel.surface,
                      pose=rel.pose, stance=rel.stance, subtree=action.subtree)
    rel = cg.supports[action.child]
    return Action("Pick", f"inv:{action.id}", action.parent, action.child, subtree=action.subtree)


# ---------------------------------------------------------------------------
# comparison


def state_dict(cg, ndigits=9):
    def pose(p):
        return None if p is None else [round(float(x), ndigits) + 0.0 for x in p]

    return {
        "supports": {
            c: [r.parent, r.surface, r.stance, pose(r.pose)] for c, r in sorted(cg.supports.items())
        },
        "status": dict(sorted(cg.status.items())),
    }


def digest(cg):
    blob = json.dumps(state_dict(cg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def same_state(a, b, tol=POSE_TOLERANCE):
    """Structural equality with poses compared to ``tol``."""
    if set(a.supports) != set(b.supports) or a.status != b.status:
        return False
    return all(a.supports[c].same_as(b.supports[c], tol) for c in a.supports)


def state_differences(a, b, tol=POSE_TOLERANCE):
    out = []
    for c in sorted(set(a.supports) | set(b.supports)):
        ra, rb = a.supports.get(c), b.supports.get(c)
        if ra is None or not ra.same_as(rb, tol):
            out.append(f"relation:{c}")
    for n in sorted(set(a.status) | set(b.status)):
        if a.status.get(n) != b.status.get(n):
            out.append(f"status:{n}")
    return out
