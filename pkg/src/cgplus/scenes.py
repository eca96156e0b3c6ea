"""Builders for common scene entities and the reference fixture scenes."""
from __future__ import annotations

import numpy as np

from .cgraph import ContactGraphPlus, ProximalRelation, SceneEntityNode, Surface, SupportingRelation
from .geom import GeometryPrimitive, OrientedBox, Region2D, convex_hull_2d, make_transform, plane_basis, rot_x

FLOOR_SIZE = 20.0
RIM = 48


def _rotation_to_up(n):
    """Rotation taking unit vector ``n`` to +z (deterministic for antiparallel n)."""
    n = np.asarray(n, float) / np.linalg.norm(n)
    z = np.array([0.0, 0.0, 1.0])
    c = float(n @ z)
    if c > 1 - 1e-12:
        return np.eye(3)
    if c < -1 + 1e-12:
        return rot_x(np.pi)
    axis = np.cross(n, z)
    s = np.linalg.norm(axis)
    k = axis / s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    R = np.eye(3) + s * K + (1 - c) * K @ K
    return np.round(R, 15) + 0.0


def face_region(points3d, normal, origin):
    """Region2D for a planar face given its 3D outline in the owner frame."""
    B = plane_basis(normal)
    uv = (np.asarray(points3d, float) - origin) @ B[:, :2]
    return convex_hull_2d(uv, origin, normal)


def disk_polygon(radius, segments=RIM):
    ang = np.linspace(0, 2 * np.pi, segments, endpoint=False)
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])


def rect_polygon(sx, sy):
    return np.array([[-sx / 2, -sy / 2], [sx / 2, -sy / 2], [sx / 2, sy / 2], [-sx / 2, sy / 2]])


def root_node(name="scene"):
    floor = Surface(Region2D(rect_polygon(FLOOR_SIZE, FLOOR_SIZE)), "support")
    return SceneEntityNode(name, "scene", (), None, (floor,), movable=False)


def box_node(name, size, mass=1.0, label="box", faces="top", surface_type="support", movable=True):
    """Box centred on its frame.  ``faces`` is ``"top"``, ``"all"`` or ``"none"``."""
    sx, sy, sz = size
    prim = GeometryPrimitive("box", (sx, sy, sz), mass=mass)
    half = np.array(size) / 2
    surfaces, stances = [], [np.eye(3)]
    if faces != "none":
        normals = [(0, 0, 1)] if faces == "top" else [(0, 0, 1), (0, 0, -1), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]
        corners = OrientedBox(np.zeros(3), half).corners()
        for n in normals:
            n = np.array(n, float)
            axis = int(np.argmax(np.abs(n)))
            origin = n * half
            pts = corners[np.isclose(corners[:, axis], origin[axis])]
            surfaces.append(Surface(face_region(pts, n, origin), surface_type))
        if faces == "all":
            stances = [_rotation_to_up(np.array(n, float)) for n in normals]
    return SceneEntityNode(name, label, (prim,), None, tuple(surfaces), tuple(stances), movable)


def cylinder_node(name, radius, height, mass=1.0, label="cylinder", kind="cylinder", top=True, bottom=False,
                  movable=True):
    prim = GeometryPrimitive(kind, (radius, height), mass=mass)
    surfaces, stances = [], [np.eye(3)]
    if top:
        surfaces.append(Surface(Region2D(disk_polygon(radius), (0, 0, height / 2), (0, 0, 1)), "support"))
    if bottom:
        # bottom plane basis flips v; the disk is symmetric so vertices carry over
        surfaces.append(Surface(Region2D(disk_polygon(radius), (0, 0, -height / 2), (0, 0, -1)), "support"))
        stances.append(rot_x(np.pi))
    return SceneEntityNode(name, label, (prim,), None, tuple(surfaces), tuple(stances), movable)


def disk_node(name, radius, thickness, mass=1.0, label="disk"):
    """Disk that can support from its top and bottom faces."""
    return cylinder_node(name, radius, thickness, mass, label, kind="disk", top=True, bottom=True)


def plate_node(name, radius, thickness=0.02, mass=0.3):
    return cylinder_node(name, radius, thickness, mass, "plate", kind="disk", top=True)


def cone_node(name, radius, height, mass=0.5, label="cone"):
    prim = GeometryPrimitive("cone", (radius, height), mass=mass)
    return SceneEntityNode(name, label, (prim,), None, (), (np.eye(3),), True)


def table_node(name, size=(1.6, 0.8, 0.75), mass=30.0, label="table"):
    return box_node(name, size, mass, label, faces="top", movable=False)


def container_node(name, outer, wall=0.005, mass=8.0, label="cabinet", top_support=True, movable=False):
    """Open-front container: floor, back, side and top panels.

    Surface 0 is the interior floor (``contain``); surface 1, when present,
    is the outer top (``support``).
    """
    w, d, h = outer
    panels = [
        ((w, d, wall), (0, 0, -h / 2 + wall / 2)),  # floor
        ((w, d, wall), (0, 0, h / 2 - wall / 2)),  # top
        ((w, wall, h - 2 * wall), (0, d / 2 - wall / 2, 0)),  # back
        ((wall, d - wall, h - 2 * wall), (-w / 2 + wall / 2, -wall / 2, 0)),  # left
        ((wall, d - wall, h - 2 * wall), (w / 2 - wall / 2, -wall / 2, 0)),  # right
    ]
    m = mass / len(panels)
    geometry = tuple(GeometryPrimitive("box", size, make_transform(translation=c), m) for size, c in panels)
    interior = rect_polygon(w - 2 * wall, d - wall)
    floor_origin = np.array([0.0, -wall / 2, -h / 2 + wall])
    surfaces = [Surface(Region2D(interior + floor_origin[:2], (0, 0, -h / 2 + wall), (0, 0, 1)), "contain")]
    if top_support:
        surfaces.append(Surface(Region2D(rect_polygon(w, d), (0, 0, h / 2), (0, 0, 1)), "support"))
    bbox = OrientedBox(np.zeros(3), np.array(outer) / 2)
    return SceneEntityNode(name, label, geometry, bbox, tuple(surfaces), (np.eye(3),), movable)


def build_graph(root, nodes, relations, status=None, proximal=(), swap=None):
    nodes = {n.instance_id: n for n in [root, *nodes]}
    supports = {r.child: r for r in relations}
    prox = frozenset(ProximalRelation(a, b) for a, b in proximal)
    return ContactGraphPlus(root.instance_id, nodes, supports, prox, dict(status or {}), swap)


def rel(parent, child, surface=0, pose=None, stance=0, dof=3):
    return SupportingRelation(parent, child, surface, pose, stance, dof)


# ---------------------------------------------------------------------------
# reference fixtures


def cabinet_scene():
    """Box and cylinder on a table next to a closed cabinet on the same table.

    Returns ``(initial, rough_goal)``.  The cabinet interior (0.43 x 0.325)
    cannot hold both objects side by side.
    """
    root = root_node()
    table = table_node("table", (1.6, 0.8, 0.75))
    side = table_node("side_table", (1.2, 0.8, 0.75), label="side_table")
    cabinet = container_node("cabinet", (0.44, 0.33, 0.40))
    box = box_node("box", (0.35, 0.30, 0.12), mass=1.0)
    cyl = cylinder_node("cylinder", 0.10, 0.15, mass=0.6)
    initial = build_graph(
        root,
        [table, side, cabinet, box, cyl],
        [
            rel("scene", "table", pose=(0.0, 0.0, 0.0)),
            rel("scene", "side_table", pose=(0.0, 1.5, 0.0)),
            rel("table", "cabinet", pose=(0.45, 0.0, 0.0)),
            rel("table", "box", pose=(-0.5, 0.0, 0.0)),
            rel("table", "cylinder", pose=(-0.1, 0.0, 0.0)),
        ],
        status={"cabinet": "closed"},
        swap="side_table",
    )
    supports = dict(initial.supports)
    supports["box"] = rel("cabinet", "box")
    supports["cylinder"] = rel("cabinet", "cylinder")
    return initial, initial.evolve(supports=supports)


def cones_scene():
    """Four objects on a table: box (any face), disk (top/bottom), two cones."""
    root = root_node()
    table = table_node("table", (1.2, 0.8, 0.75))
    box = box_node("box", (0.12, 0.10, 0.08), faces="all", mass=0.5)
    disk = disk_node("disk", 0.2, 0.02, mass=0.8)
    grey = cone_node("grey_cone", 0.04, 0.10)
    red = cone_node("red_cone", 0.05, 0.10)
    return build_graph(
        root,
        [table, box, disk, grey, red],
        [
            rel("scene", "table", pose=(0.0, 0.0, 0.0)),
            rel("table", "disk", pose=(-0.3, 0.0, 0.0)),
            rel("table", "box", pose=(0.1, 0.0, 0.0)),
            rel("table", "grey_cone", pose=(0.3, 0.2, 0.0)),
            rel("table", "red_cone", pose=(0.3, -0.2, 0.0)),
        ],
        swap="table",
    )


def nested_scene():
    """Nested containers (wardrobe > cabinet > drawer) and objects on a table.

    Returns ``(initial, rough_goal)``; the goal puts cup, bottle and purple
    box into the drawer that already holds a brown box and a cylinder.
    """
    root = root_node()
    table = table_node("table", (1.4, 0.8, 0.75))
    wardrobe = container_node("wardrobe", (0.90, 0.62, 1.10), label="wardrobe", top_support=False)
    cabinet = container_node("cabinet", (0.86, 0.58, 0.70), label="cabinet", top_support=False)
    drawer = container_node("drawer", (0.80, 0.52, 0.30), label="drawer", top_support=False)
    brown = box_node("brown_box", (0.20, 0.18, 0.10), mass=0.8, label="brown_box")
    cylinder = cylinder_node("cylinder", 0.05, 0.12, mass=0.3)
    cup = cylinder_node("cup", 0.04, 0.08, mass=0.2, label="cup")
    bottle = box_node("bottle", (0.07, 0.07, 0.22), mass=0.4, label="bottle", faces="all")
    purple = box_node("purple_box", (0.30, 0.24, 0.09), mass=0.9, label="purple_box")
    initial = build_graph(
        root,
        [table, wardrobe, cabinet, drawer, brown, cylinder, cup, bottle, purple],
        [
            rel("scene", "table", pose=(0.0, 0.0, 0.0)),
            rel("scene", "wardrobe", pose=(1.4, 0.0, 0.0)),
            rel("wardrobe", "cabinet", pose=(0.0, 0.0, 0.0)),
            rel("cabinet", "drawer", pose=(0.0, 0.0, 0.0)),
            rel("drawer", "brown_box", pose=(0.0, 0.0, 0.0)),
            rel("drawer", "cylinder", pose=(0.25, 0.1, 0.0)),
            rel("table", "cup", pose=(-0.5, 0.2, 0.0)),
            rel("table", "bottle", pose=(-0.3, 0.2, 0.0)),
            rel("table", "purple_box", pose=(0.2, 0.0, 0.0)),
        ],
        status={"wardrobe": "closed", "cabinet": "closed", "drawer": "closed"},
        swap="table",
    )
    supports = dict(initial.supports)
    for name in ("cup", "bottle", "purple_box"):
        supports[name] = rel("drawer", name)
    return initial, initial.evolve(supports=supports)


def plate_radii(n, largest=0.15, ratio=0.85):
    return [largest * ratio**i for i in range(n)]


def stacking_scene(n, rng):
    """``n`` plates of strictly decreasing radius scattered on a 2 x 1 m table.

    Returns ``(initial, rough_goal, above)`` where ``above`` lists
    ``(upper, lower)`` pairs: every smaller plate must end up above every
    larger one.
    """
    root = root_node()
    table = table_node("table", (2.0, 1.0, 0.75))
    radii = plate_radii(n)
    plates = [plate_node(f"plate{i}", r) for i, r in enumerate(radii)]
    placed, relations = [], [rel("scene", "table", pose=(0.0, 0.0, 0.0))]
    for i in rng.permutation(n):
        r = radii[i]
        for _ in range(10000):
            xy = rng.uniform([-1.0 + r, -0.5 + r], [1.0 - r, 0.5 - r])
            if all(np.hypot(*(xy - q)) > r + rq + 0.01 for q, rq in placed):
                break
        else:  # pragma: no cover - table has ample room for n <= 10
            raise RuntimeError("could not scatter plates")
        placed.append((xy, r))
        relations.append(rel("table", f"plate{i}", pose=(xy[0], xy[1], float(rng.uniform(-np.pi, np.pi)))))
    initial = build_graph(root, [table, *plates], relations, swap="table")
    above = [(f"plate{j}", f"plate{i}") for i in range(n) for j in range(i + 1, n)]
    return initial, initial, above
