"""Geometric kernels: planar signed-distance regions, convex primitives,
3D signed distance (GJK for separation, polytope expansion for penetration),
convex hulls, overlap regions, centre-of-mass projection and box containment.

All lengths are metres, masses kilograms.  Rigid transforms are 4x4 numpy
arrays.  Gravity is fixed to world -z.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError
from shapely.geometry import Polygon

from .errors import (
    DegenerateHullError,
    InvalidGeometryError,
    InvalidMassError,
    NoContactError,
    UnsupportedGeometryError,
)

Z_UP = np.array([0.0, 0.0, 1.0])
UP_TOLERANCE = 1e-6  # rad
CONTAIN_TOLERANCE = 1e-9  # m
RIM_SEGMENTS = 48

KINDS = ("box", "cylinder", "cone", "disk", "convex-mesh")


# ---------------------------------------------------------------------------
# rigid transforms


def make_transform(rotation=None, translation=None):
    T = np.eye(4)
    if rotation is not None:
        T[:3, :3] = rotation
    if translation is not None:
        T[:3, 3] = translation
    return T


def rot_z(yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def transform_points(T, pts):
    pts = np.asarray(pts, dtype=float)
    return pts @ T[:3, :3].T + T[:3, 3]


def invert_transform(T):
    R = T[:3, :3]
    return make_transform(R.T, -R.T @ T[:3, 3])


def plane_basis(normal):
    """Deterministic right-handed in-plane basis ``(u, v, n)`` for ``normal``."""
    return _plane_basis(tuple(float(x) for x in np.asarray(normal).reshape(3))).copy()


@lru_cache(maxsize=4096)
def _plane_basis(normal):
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = a - (a @ n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return np.column_stack([u, v, n])


def is_up(normal, rotation=None):
    """True if ``normal`` (rotated by ``rotation``) is antiparallel to gravity."""
    n = np.asarray(normal, dtype=float)
    if rotation is not None:
        n = rotation @ n
    n = n / np.linalg.norm(n)
    return np.arccos(np.clip(n @ Z_UP, -1.0, 1.0)) <= UP_TOLERANCE


# ---------------------------------------------------------------------------
# planar regions


def _signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _self_intersects(v):
    """Proper crossing between any two non-adjacent edges."""
    n = len(v)
    if n < 4:
        return False
    a, b = v, np.roll(v, -1, axis=0)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    d1 = orient(a[j], b[j], a[i])
    d2 = orient(a[j], b[j], b[i])
    d3 = orient(a[i], b[i], a[j])
    d4 = orient(a[i], b[i], b[j])
    return bool(np.any((d1 * d2 < 0) & (d3 * d4 < 0)))


def _convex_region(vertices, origin=None, normal=None):
    """Region2D from vertices already known to be simple and CCW (skips checks)."""
    r = object.__new__(Region2D)
    v = np.asarray(vertices, dtype=float)
    v.setflags(write=False)
    n = Z_UP.copy() if normal is None else np.asarray(normal, dtype=float)
    object.__setattr__(r, "vertices", v)
    object.__setattr__(r, "origin", np.zeros(3) if origin is None else np.asarray(origin, dtype=float).reshape(3))
    object.__setattr__(r, "normal", n / np.linalg.norm(n))
    return r


@dataclass(frozen=True, eq=False)
class Region2D:
    """Planar polygonal region with a signed distance field.

    ``vertices`` are plane coordinates (metres), stored counter-clockwise.
    ``origin`` and ``normal`` locate the plane in the owning frame.
    """

    vertices: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    normal: np.ndarray = field(default_factory=lambda: Z_UP.copy())

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise InvalidGeometryError("region needs at least 3 vertices")
        area = _signed_area(v)
        if abs(area) <= 1e-14:
            raise InvalidGeometryError("region has zero area")
        if area < 0:
            v = v[::-1].copy()
        if _self_intersects(v):
            raise InvalidGeometryError("region boundary self-intersects")
        normal = np.asarray(self.normal, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        object.__setattr__(self, "normal", normal / np.linalg.norm(normal))

    @property
    def area(self):
        return _signed_area(self.vertices)

    @property
    def centroid(self):
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        cross = x * np.roll(y, -1) - np.roll(x, -1) * y
        a = cross.sum() / 2.0
        cx = np.sum((x + np.roll(x, -1)) * cross) / (6 * a)
        cy = np.sum((y + np.roll(y, -1)) * cross) / (6 * a)
        return np.array([cx, cy])

    @property
    def is_convex(self):
        v = self.vertices
        d = np.roll(v, -1, axis=0) - v
        turn = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
        return bool(np.all(turn >= -1e-12 * max(float(np.ptp(v)), 1.0) ** 2))

    @property
    def extent(self):
        return self.vertices.max(axis=0) - self.vertices.min(axis=0)

    def frame(self):
        """Transform from plane coordinates (z along the normal) to the owner frame."""
        return make_transform(plane_basis(self.normal), self.origin)

    def to_polygon(self):
        return Polygon(self.vertices)

    def with_frame(self, origin, normal):
        return Region2D(self.vertices, origin, normal)

    def __repr__(self):
        return f"Region2D({len(self.vertices)} vertices, area={self.area:.4g})"


def convex_polygon(vertices, origin=None, normal=None):
    """Region from the vertices of a convex polygon given in either winding."""
    v = np.asarray(vertices, dtype=float)
    a = _signed_area(v)
    if abs(a) <= 1e-15:
        raise DegenerateHullError("polygon has no area")
    return _convex_region(v if a > 0 else v[::-1].copy(), origin, normal)


def planar_copy(region):
    """The same polygon placed in the plane's own coordinates (z up, origin 0)."""
    return _convex_region(region.vertices)


def sdf2d_eval(region, point):
    """Signed distance from ``point`` (or an (N, 2) array) to the region boundary.

    Negative inside, zero on the boundary, positive outside.
    """
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    a = region.vertices
    b = np.roll(a, -1, axis=0)
    ab = b - a  # (E, 2)
    ap = pts[:, None, :] - a[None, :, :]  # (N, E, 2)
    t = np.clip(np.einsum("nek,ek->ne", ap, ab) / np.einsum("ek,ek->e", ab, ab), 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    dist = np.linalg.norm(pts[:, None, :] - closest, axis=2).min(axis=1)
    inside = point_in_polygon(region.vertices, pts)
    out = np.where(inside, -dist, dist)
    out[dist == 0.0] = 0.0
    return float(out[0]) if single else out


def point_in_polygon(vertices, pts):
    """Crossing-number test; boundary points may land either side."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    a = np.asarray(vertices)
    b = np.roll(a, -1, axis=0)
    px, py = pts[:, 0:1], pts[:, 1:2]
    ay, by = a[None, :, 1], b[None, :, 1]
    straddle = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        xcross = a[None, :, 0] + (py - ay) * (b[None, :, 0] - a[None, :, 0]) / (by - ay)
    hits = straddle & (px < xcross)
    return (hits.sum(axis=1) % 2) == 1


def convex_hull_2d(points, origin=None, normal=None):
    """Minimal convex polygon (counter-clockwise) containing ``points``.

    Andrew's monotone chain; collinear boundary points are dropped.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        raise DegenerateHullError("need at least 3 distinct points")
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    scale = max(float(np.ptp(pts, axis=0).max()), 1e-300)
    eps = 1e-12 * scale * scale
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    # drop nearly collinear vertices only after the exact chain is built; a
    # tolerant pop above can discard a true extreme point
    k = 0
    while len(hull) > 3 and k < len(hull):
        if cross(hull[k - 1], hull[k], hull[(k + 1) % len(hull)]) <= eps:
            hull.pop(k)
            k = max(k - 1, 0)
        else:
            k += 1
    hull = np.array(hull)
    if len(hull) < 3 or abs(_signed_area(hull)) <= eps:
        raise DegenerateHullError("points are collinear")
    return _convex_region(hull, origin, normal)


def project_to_plane(region_frame, pts_owner):
    """Project owner-frame 3D points along gravity into plane coordinates."""
    Tinv = invert_transform(region_frame)
    return transform_points(Tinv, pts_owner)[:, :2]


def overlap_region(parent_surface, child_footprint):
    """Convex hull of the intersection of a parent surface and a child footprint.

    Both regions must be expressed in the same owner frame; the child is
    projected along gravity onto the parent plane first.  Raises
    :class:`NoContactError` when the intersection is empty.
    """
    if not is_up(parent_surface.normal):
        raise InvalidGeometryError("parent surface is not perpendicular to gravity")
    child_3d = transform_points(
        child_footprint.frame(),
        np.column_stack([child_footprint.vertices, np.zeros(len(child_footprint.vertices))]),
    )
    child_2d = project_to_plane(parent_surface.frame(), child_3d)
    # an affine image of a convex footprint stays convex
    if abs(_signed_area(child_2d)) <= 1e-12:
        raise NoContactError("child footprint is degenerate")
    inter = parent_surface.to_polygon().intersection(Polygon(child_2d))
    if inter.is_empty or inter.area <= 1e-12:
        raise NoContactError("empty overlap between parent surface and child footprint")
    if parent_surface.is_convex and inter.geom_type == "Polygon":
        v = np.asarray(inter.exterior.coords)[:-1]
        if _signed_area(v) < 0:
            v = v[::-1]
        return _convex_region(v, parent_surface.origin, parent_surface.normal)
    coords = []
    for g in getattr(inter, "geoms", [inter]):
        if hasattr(g, "exterior"):
            coords.extend(g.exterior.coords)
        else:
            coords.extend(g.coords)
    try:
        return convex_hull_2d(coords, parent_surface.origin, parent_surface.normal)
    except DegenerateHullError as exc:
        raise NoContactError("overlap is degenerate") from exc


# ---------------------------------------------------------------------------
# primitives


@dataclass(frozen=True, eq=False)
class OrientedBox:
    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        h = np.asarray(self.half_extents, dtype=float).reshape(3)
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if np.any(h <= 0):
            raise InvalidGeometryError("half extents must be positive")
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-9:
            raise InvalidGeometryError("rotation is not orthonormal")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extents", h)
        object.__setattr__(self, "rotation", R)

    def corners(self):
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], float)
        return self.center + (signs * self.half_extents) @ self.rotation.T

    def transformed(self, T):
        return OrientedBox(T[:3, :3] @ self.center + T[:3, 3], self.half_extents, T[:3, :3] @ self.rotation)

    def contains_points(self, pts, tol=CONTAIN_TOLERANCE):
        local = (np.asarray(pts, dtype=float) - self.center) @ self.rotation
        return np.all(np.abs(local) <= self.half_extents + tol, axis=-1)

    @classmethod
    def from_points(cls, pts):
        pts = np.asarray(pts, dtype=float)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        return cls((lo + hi) / 2, np.maximum((hi - lo) / 2, 1e-9))


@dataclass(frozen=True, eq=False)
class GeometryPrimitive:
    """Convex solid in its owner's frame.

    ``dims`` by kind: box ``(sx, sy, sz)`` full extents; cylinder and disk
    ``(radius, height)`` along local z; cone ``(radius, height)`` with the
    base at ``-h/2`` and apex at ``+h/2``; convex-mesh an (N, 3) vertex array.
    """

    kind: str
    dims: tuple
    local_pose: np.ndarray = field(default_factory=lambda: np.eye(4))
    mass: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedGeometryError(f"unknown primitive kind {self.kind!r}")
        if self.kind == "convex-mesh":
            verts = np.asarray(self.dims, dtype=float).reshape(-1, 3)
            try:
                hull = ConvexHull(verts)
            except (QhullError, ValueError) as exc:
                raise InvalidGeometryError("convex-mesh hull is degenerate") from exc
            verts = verts[hull.vertices]
            verts.setflags(write=False)
            object.__setattr__(self, "dims", verts)
        else:
            dims = tuple(float(d) for d in self.dims)
            expected = 3 if self.kind == "box" else 2
            if len(dims) != expected or min(dims) <= 0:
                raise InvalidGeometryError(f"{self.kind} needs {expected} positive extents")
            object.__setattr__(self, "dims", dims)
        pose = np.asarray(self.local_pose, dtype=float).reshape(4, 4)
        object.__setattr__(self, "local_pose", pose)
        if self.mass < 0:
            raise InvalidMassError("negative mass")

    # support mapping in the primitive's own frame
    def support_local(self, d):
        k = self.kind
        if k == "box":
            half = np.array(self.dims) / 2
            return np.where(d >= 0, half, -half)
        if k in ("cylinder", "disk"):
            r, h = self.dims
            rho = np.hypot(d[0], d[1])
            xy = np.array([r, 0.0]) if rho < 1e-15 else r * d[:2] / rho
            return np.array([xy[0], xy[1], h / 2 if d[2] >= 0 else -h / 2])
        if k == "cone":
            r, h = self.dims
            apex = np.array([0.0, 0.0, h / 2])
            rho = np.hypot(d[0], d[1])
            xy = np.array([r, 0.0]) if rho < 1e-15 else r * d[:2] / rho
            rim = np.array([xy[0], xy[1], -h / 2])
            return apex if apex @ d >= rim @ d else rim
        verts = self.dims
        return verts[int(np.argmax(verts @ d))]

    def vertices_local(self, segments=RIM_SEGMENTS):
        """Polytope approximation (exact for box and mesh)."""
        k = self.kind
        if k == "box":
            return OrientedBox(np.zeros(3), np.array(self.dims) / 2).corners()
        if k == "convex-mesh":
            return np.array(self.dims)
        r, h = self.dims
        ang = np.linspace(0, 2 * np.pi, segments, endpoint=False)
        rim = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        bottom = np.column_stack([rim, np.full(segments, -h / 2)])
        if k == "cone":
            return np.vstack([bottom, [[0.0, 0.0, h / 2]]])
        top = np.column_stack([rim, np.full(segments, h / 2)])
        return np.vstack([bottom, top])

    def centroid_local(self):
        if self.kind == "cone":
            return np.array([0.0, 0.0, -self.dims[1] / 4])
        if self.kind == "convex-mesh":
            return _mesh_centroid(self.dims)
        return np.zeros(3)

    def world_vertices(self, owner_pose):
        return transform_points(owner_pose @ self.local_pose, self.vertices_local())

    def world_centroid(self, owner_pose):
        T = owner_pose @ self.local_pose
        return T[:3, :3] @ self.centroid_local() + T[:3, 3]

    def key(self):
        dims = np.asarray(self.dims, dtype=float)
        return (self.kind, dims.tobytes(), self.local_pose.tobytes())


def _mesh_centroid(verts):
    hull = ConvexHull(verts)
    ref = verts.mean(axis=0)
    total_v, acc = 0.0, np.zeros(3)
    for simplex in hull.simplices:
        a, b, c = verts[simplex]
        vol = abs(np.dot(a - ref, np.cross(b - ref, c - ref))) / 6.0
        total_v += vol
        acc += vol * (a + b + c + ref) / 4.0
    return acc / total_v


# ---------------------------------------------------------------------------
# centre of mass and containment


def project_com(items, plane):
    """Mass-weighted centroid of ``items`` projected along gravity onto ``plane``.

    ``items`` holds ``(primitive, world_pose)`` or ``(primitive, world_pose, mass)``.
    ``plane`` is a :class:`Region2D` whose frame is in world coordinates.
    """
    total, acc = 0.0, np.zeros(3)
    for item in items:
        prim, pose = item[0], item[1]
        m = float(item[2]) if len(item) > 2 else float(prim.mass)
        total += m
        acc += m * prim.world_centroid(pose)
    if total <= 0:
        raise InvalidMassError("total mass must be positive")
    com = acc / total
    return project_to_plane(plane.frame(), com[None])[0]


def union_bbox_contained(parent, children, tol=CONTAIN_TOLERANCE):
    """True iff every corner of every child box lies inside ``parent``."""
    for child in children:
        if not np.all(parent.contains_points(child.corners(), tol)):
            return False
    return True


# ---------------------------------------------------------------------------
# 3D signed distance


class _Placed:
    __slots__ = ("prim", "R", "t")

    def __init__(self, prim, pose):
        T = pose @ prim.local_pose
        self.prim, self.R, self.t = prim, T[:3, :3], T[:3, 3]

    def support(self, d):
        return self.R @ self.prim.support_local(self.R.T @ d) + self.t


def _minkowski_support(a, b, d):
    return a.support(d) - b.support(-d)


def _project_affine(P):
    """Closest point to the origin on segment/triangle/tetrahedron ``P`` if the
    projection onto its affine hull is interior, else None."""
    if len(P) == 1:
        return P[0]
    E = P[1:] - P[0]
    G = E @ E.T
    try:
        mu = np.linalg.solve(G, -(E @ P[0]))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(mu)) or mu.min() < -1e-12 or mu.sum() > 1.0 + 1e-12:
        return None
    return P[0] + mu @ E


def _closest_on_simplex(pts):
    """Closest point to the origin on the hull of <= 4 points and its support set.

    Only faces containing the newest point (last row) are searched; the
    previous simplex already realised its own minimum.
    """
    n = len(pts)
    last = n - 1
    best, best_set, best_d = None, None, np.inf
    for size in range(1, n + 1):
        for idx in combinations(range(last), size - 1):
            sel = [*idx, last]
            x = _project_affine(pts[sel])
            if x is None:
                continue
            d = x @ x
            if d < best_d * (1 - 1e-12) - 1e-300:
                best, best_set, best_d = x, sel, d
    if best is None:  # numerically degenerate: fall back to the newest vertex
        return pts[last], pts[[last]]
    return best, pts[best_set]


def _gjk_distance(a, b, max_iter=200, tol=1e-10, stop_above=None):
    """Separation distance between two convex sets; 0.0 if they intersect.

    With ``stop_above`` set, returns a certified lower bound as soon as it
    exceeds that value.
    """
    d = a.t - b.t
    if d @ d < 1e-24:
        d = np.array([1.0, 0.0, 0.0])
    v = _minkowski_support(a, b, d)
    simplex = v[None, :]
    for _ in range(max_iter):
        vv = v @ v
        if vv < 1e-24:
            return 0.0
        w = _minkowski_support(a, b, -v)
        vw = v @ w
        if stop_above is not None and vw > 0 and vw / np.sqrt(vv) > stop_above:
            return float(vw / np.sqrt(vv))
        if vv - vw <= tol * max(vv, 1e-12):
            return float(np.sqrt(vv))
        if np.any(np.all(np.abs(simplex - w) < 1e-15, axis=1)):
            return float(np.sqrt(vv))
        simplex = np.vstack([simplex, w])
        v, simplex = _closest_on_simplex(simplex)
        if len(simplex) == 4:
            return 0.0
    return float(np.sqrt(v @ v))


_EPA_DIRS = np.array(
    [[x, y, z] for x in (-1, 0, 1) for y in (-1, 0, 1) for z in (-1, 0, 1) if (x, y, z) != (0, 0, 0)],
    dtype=float,
)
_EPA_DIRS /= np.linalg.norm(_EPA_DIRS, axis=1, keepdims=True)


def _penetration_depth(a, b, max_iter=256, tol=1e-9):
    """Distance from the origin to the boundary of ``A - B`` (origin inside).

    Expanding-polytope scheme: the inner hull of Minkowski-difference support
    points is refined along the normal of its face closest to the origin.
    """
    pts = [_minkowski_support(a, b, d) for d in _EPA_DIRS]
    depth = 0.0
    for _ in range(max_iter):
        hull = ConvexHull(np.array(pts))
        offs = -hull.equations[:, 3]
        k = int(np.argmin(offs))
        n = hull.equations[k, :3]
        s = _minkowski_support(a, b, n)
        depth = float(offs[k])
        if n @ s - depth <= tol:
            return depth
        pts.append(s)
    return depth


def signed_distance3d(a, pose_a, b, pose_b, cutoff=None):
    """Signed distance between two primitives placed by their owners' poses.

    Positive: minimal separation.  Negative: penetration depth of the convex
    hulls.  The argument order is canonicalised so the result is exactly
    symmetric.  With ``cutoff``, any value above it may be a lower bound on
    the separation rather than the exact distance.
    """
    for p in (a, b):
        if not isinstance(p, GeometryPrimitive):
            raise UnsupportedGeometryError(f"unsupported geometry {type(p).__name__}")
    ka = (a.key(), np.asarray(pose_a, float).tobytes())
    kb = (b.key(), np.asarray(pose_b, float).tobytes())
    if kb < ka:
        a, pose_a, b, pose_b = b, pose_b, a, pose_a
    pa, pb = _Placed(a, np.asarray(pose_a, float)), _Placed(b, np.asarray(pose_b, float))
    dist = _gjk_distance(pa, pb, stop_above=cutoff)
    if dist > 1e-9:
        return dist
    return -_penetration_depth(pa, pb)


def world_aabb(prim, pose):
    """Exact axis-aligned bounds from the support mapping."""
    placed = _Placed(prim, np.asarray(pose, float))
    eye = np.eye(3)
    hi = np.array([placed.support(eye[i])[i] for i in range(3)])
    lo = np.array([placed.support(-eye[i])[i] for i in range(3)])
    return lo, hi


def aabb_gap(box_a, box_b):
    """Lower bound on the distance between two axis-aligned boxes."""
    lo = np.maximum(box_a[0] - box_b[1], box_b[0] - box_a[1])
    lo = np.maximum(lo, 0.0)
    return float(np.linalg.norm(lo))
