"""Shared geometric primitives: convex polytopes, separating-axis tests,
planar polygon operations, and segment/triangle intersection.

Everything here treats contact as a closed-set predicate: shapes that merely
touch (distance exactly zero) count as intersecting. All functions are pure
and operate on plain numpy arrays, so they are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateHull

EDGE_DIR_TOL = 1e-9


def unit(v):
    """Normalize a vector; raises on near-zero input."""
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError("cannot normalize near-zero vector")
    return np.asarray(v, dtype=float) / n


def yaw_matrix(yaw: float) -> np.ndarray:
    """Rotation about +z by `yaw` radians."""
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal in-plane basis (e1, e2) for a unit normal."""
    n = np.asarray(normal, dtype=float)
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = unit(np.cross(n, ref))
    e2 = np.cross(n, e1)
    return e1, e2


def _dedup_directions(dirs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Deduplicate direction vectors up to sign. Input (N,3) unit vectors."""
    if len(dirs) == 0:
        return dirs.reshape(0, 3)
    canon = np.where(
        (dirs[:, [0]] < -tol)
        | ((np.abs(dirs[:, [0]]) <= tol) & (dirs[:, [1]] < -tol))
        | (
            (np.abs(dirs[:, [0]]) <= tol)
            & (np.abs(dirs[:, [1]]) <= tol)
            & (dirs[:, [2]] < -tol)
        ),
        -dirs,
        dirs,
    )
    rounded = np.round(canon / tol) * tol
    _, idx = np.unique(rounded, axis=0, return_index=True)
    return canon[np.sort(idx)]


@dataclass(frozen=True)
class ConvexPolytope:
    """A convex polyhedron described by its vertices plus the face normals and
    unique edge directions needed for separating-axis tests.

    Vertices are in some body frame; `transformed` produces world-frame copies.
    """

    vertices: np.ndarray
    face_normals: np.ndarray
    face_offsets: np.ndarray
    edge_dirs: np.ndarray
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    volume: float = 0.0
    centroid: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def from_points(cls, points) -> "ConvexPolytope":
        """Convex hull of a 3D point cloud. Raises QhullError on degenerate input."""
        points = np.asarray(points, dtype=float)
        hull = ConvexHull(points)
        verts = points[hull.vertices]
        # map original indices -> hull-local indices for the edge list
        remap = {orig: i for i, orig in enumerate(hull.vertices)}
        eqs = hull.equations  # (F, 4): n . x + d <= 0 inside
        normals = eqs[:, :3]
        offsets = -eqs[:, 3]
        # dedup coplanar faces for the SAT axis set
        ndirs = _dedup_directions(normals / np.linalg.norm(normals, axis=1, keepdims=True))
        edge_set = set()
        for simplex in hull.simplices:
            for a, b in ((0, 1), (1, 2), (2, 0)):
                i, j = remap[simplex[a]], remap[simplex[b]]
                edge_set.add((min(i, j), max(i, j)))
        edges = np.array(sorted(edge_set), dtype=np.int64)
        edge_vecs = verts[edges[:, 1]] - verts[edges[:, 0]]
        edge_dirs = _dedup_directions(
            edge_vecs / np.linalg.norm(edge_vecs, axis=1, keepdims=True)
        )
        interior = verts.mean(axis=0)
        vol, cen = _hull_volume_centroid(points, hull)
        return cls(
            vertices=verts,
            face_normals=ndirs,
            face_offsets=np.array([]),
            edge_dirs=edge_dirs,
            edges=edges,
            volume=vol,
            centroid=cen,
        ).with_offsets(interior)

    def with_offsets(self, interior: np.ndarray) -> "ConvexPolytope":
        """Recompute per-face offsets so that `interior` satisfies n.x <= d."""
        proj = self.vertices @ self.face_normals.T
        offs = proj.max(axis=0)
        # flip normals so the interior point is on the <= side
        flip = (self.face_normals @ interior) > offs + 1e-12
        normals = np.where(flip[:, None], -self.face_normals, self.face_normals)
        offs = (self.vertices @ normals.T).max(axis=0)
        return ConvexPolytope(
            vertices=self.vertices,
            face_normals=normals,
            face_offsets=offs,
            edge_dirs=self.edge_dirs,
            edges=self.edges,
            volume=self.volume,
            centroid=self.centroid,
        )

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "ConvexPolytope":
        """Rigidly transform the polytope (rotation 3x3, translation 3,)."""
        return ConvexPolytope(
            vertices=self.vertices @ rotation.T + translation,
            face_normals=self.face_normals @ rotation.T,
            face_offsets=self.face_offsets,  # offsets stale; SAT only uses verts/dirs
            edge_dirs=self.edge_dirs @ rotation.T,
            edges=self.edges,
            volume=self.volume,
            centroid=rotation @ self.centroid + translation,
        )

    def scaled_about(self, center: np.ndarray, factor: float) -> "ConvexPolytope":
        verts = center + factor * (self.vertices - center)
        return ConvexPolytope(
            vertices=verts,
            face_normals=self.face_normals,
            face_offsets=(verts @ self.face_normals.T).max(axis=0),
            edge_dirs=self.edge_dirs,
            edges=self.edges,
            volume=self.volume * factor**3,
            centroid=center + factor * (self.centroid - center),
        )

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        """Half-space membership test for (N,3) points (or a single point)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all(pts @ self.face_normals.T <= self.face_offsets + tol, axis=1)
        return inside if np.ndim(points) == 2 else bool(inside[0])

    def aabb(self) -> np.ndarray:
        return np.array([self.vertices.min(axis=0), self.vertices.max(axis=0)])


def _hull_volume_centroid(points: np.ndarray, hull: ConvexHull) -> tuple[float, np.ndarray]:
    """Volume and volumetric centroid by fanning tetrahedra from the vertex mean."""
    o = points[hull.vertices].mean(axis=0)
    a = points[hull.simplices[:, 0]] - o
    b = points[hull.simplices[:, 1]] - o
    c = points[hull.simplices[:, 2]] - o
    # simplex winding from qhull is not consistent; the fan origin is interior,
    # so unsigned tetrahedron volumes still partition the hull exactly
    vols = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0
    cents = o + (a + b + c) / 4.0
    total = vols.sum()
    if total <= 0.0:
        raise DegenerateHull("hull has no volume")
    centroid = (cents * vols[:, None]).sum(axis=0) / total
    return total, centroid


def make_box(size, center=(0.0, 0.0, 0.0)) -> ConvexPolytope:
    """Axis-aligned box polytope of full extents `size` centered at `center`."""
    sx, sy, sz = np.asarray(size, dtype=float) / 2.0
    cx, cy, cz = center
    corners = np.array(
        [
            [cx + dx, cy + dy, cz + dz]
            for dx in (-sx, sx)
            for dy in (-sy, sy)
            for dz in (-sz, sz)
        ]
    )
    return ConvexPolytope.from_points(corners)


# ---------------------------------------------------------------------------
# Separating-axis tests
# ---------------------------------------------------------------------------


def _axes_cross(dirs_a: np.ndarray, dirs_b: np.ndarray) -> np.ndarray:
    """All pairwise cross products, near-zero results dropped (parallel pairs)."""
    if len(dirs_a) == 0 or len(dirs_b) == 0:
        return np.zeros((0, 3))
    cross = np.cross(dirs_a[:, None, :], dirs_b[None, :, :]).reshape(-1, 3)
    norms = np.linalg.norm(cross, axis=1)
    keep = norms > EDGE_DIR_TOL
    return cross[keep] / norms[keep, None]


def convex_intersect(
    verts_a: np.ndarray,
    verts_b: np.ndarray,
    normals_a: np.ndarray,
    normals_b: np.ndarray,
    edges_a: np.ndarray,
    edges_b: np.ndarray,
) -> bool:
    """Exact SAT intersection of two convex polytopes given candidate axis
    ingredients (face normals and unique edge directions of each)."""
    axes = [normals_a, normals_b, _axes_cross(edges_a, edges_b)]
    axes = np.concatenate([a for a in axes if len(a)], axis=0)
    pa = verts_a @ axes.T
    pb = verts_b @ axes.T
    separated = (pa.max(axis=0) < pb.min(axis=0)) | (pb.max(axis=0) < pa.min(axis=0))
    return not bool(separated.any())


def polytope_intersects_polygon(poly: ConvexPolytope, polygon: np.ndarray, normal: np.ndarray) -> bool:
    """SAT between a convex polytope and a planar convex polygon (closed-set)."""
    edges = np.diff(np.vstack([polygon, polygon[:1]]), axis=0)
    lens = np.linalg.norm(edges, axis=1)
    edges = edges[lens > EDGE_DIR_TOL] / lens[lens > EDGE_DIR_TOL, None]
    side_normals = _axes_cross(edges, normal[None, :])
    return convex_intersect(
        poly.vertices,
        polygon,
        poly.face_normals,
        np.vstack([normal[None, :], side_normals]),
        poly.edge_dirs,
        edges,
    )


def polytope_intersects_triangles(poly: ConvexPolytope, tri_verts: np.ndarray) -> bool:
    """True iff the polytope intersects any of the (N,3,3) triangles.

    Vectorized SAT over all triangles at once; AABB prefilter first.
    """
    if len(tri_verts) == 0:
        return False
    lo, hi = poly.aabb()
    tmin = tri_verts.min(axis=1)
    tmax = tri_verts.max(axis=1)
    near = np.all((tmax >= lo) & (tmin <= hi), axis=1)
    if not near.any():
        return False
    tv = tri_verts[near]  # (M,3,3)
    m = len(tv)

    # static axes: polytope face normals
    pa = poly.vertices @ poly.face_normals.T  # (V,F)
    ta = np.einsum("mkj,fj->mkf", tv, poly.face_normals)  # (M,3,F)
    sep = (ta.max(axis=1) < pa.min(axis=0)) | (ta.min(axis=1) > pa.max(axis=0))  # (M,F)
    alive = ~sep.any(axis=1)
    if not alive.any():
        return False
    tv = tv[alive]
    m = len(tv)

    # triangle normals
    e0 = tv[:, 1] - tv[:, 0]
    e1 = tv[:, 2] - tv[:, 1]
    e2 = tv[:, 0] - tv[:, 2]
    tn = np.cross(e0, e1)  # (M,3)
    nrm = np.linalg.norm(tn, axis=1)
    nrm[nrm < 1e-30] = 1.0
    tn = tn / nrm[:, None]
    pv = np.einsum("vj,mj->mv", poly.vertices, tn)  # (M,V)
    tvn = np.einsum("mkj,mj->mk", tv, tn)  # (M,3)
    sep = (tvn.max(axis=1) < pv.min(axis=1)) | (tvn.min(axis=1) > pv.max(axis=1))
    alive = ~sep
    if not alive.any():
        return False
    tv, e0, e1, e2 = tv[alive], e0[alive], e1[alive], e2[alive]
    m = len(tv)

    # cross axes: polytope edge dirs x triangle edges -> (M, E*3, 3)
    tri_edges = np.stack([e0, e1, e2], axis=1)  # (M,3,3)
    axes = np.cross(poly.edge_dirs[None, :, None, :], tri_edges[:, None, :, :])
    axes = axes.reshape(m, -1, 3)  # (M, A, 3)
    norms = np.linalg.norm(axes, axis=2)
    degenerate = norms < EDGE_DIR_TOL
    norms[degenerate] = 1.0
    axes = axes / norms[:, :, None]

    pv = np.einsum("vj,maj->mav", poly.vertices, axes)  # (M,A,V)
    tp = np.einsum("mkj,maj->mak", tv, axes)  # (M,A,3)
    sep = (tp.max(axis=2) < pv.min(axis=2)) | (tp.min(axis=2) > pv.max(axis=2))
    sep &= ~degenerate  # a degenerate axis can never witness separation
    return bool((~sep.any(axis=1)).any())


def boxes_intersect_slab(
    cell_min: np.ndarray,
    cell_max: np.ndarray,
    polygon: np.ndarray,
    normal: np.ndarray,
    thickness: float,
) -> np.ndarray:
    """Vectorized SAT: which of N axis-aligned boxes intersect the slab obtained
    by thickening a planar convex polygon by +-thickness along its normal.

    cell_min/cell_max: (N,3). Returns (N,) bool. Touching counts as intersecting.
    """
    n = unit(normal)
    slab_verts = np.vstack([polygon + thickness * n, polygon - thickness * n])
    edges = np.diff(np.vstack([polygon, polygon[:1]]), axis=0)
    lens = np.linalg.norm(edges, axis=1)
    edir = edges[lens > EDGE_DIR_TOL] / lens[lens > EDGE_DIR_TOL, None]

    axes_list = [np.eye(3), n[None, :], _axes_cross(edir, n[None, :])]
    prism_edges = np.vstack([edir, n[None, :]])
    axes_list.append(_axes_cross(np.eye(3), prism_edges))
    axes = np.concatenate(axes_list, axis=0)  # (A,3)

    centers = (cell_min + cell_max) / 2.0
    half = (cell_max - cell_min) / 2.0
    box_c = centers @ axes.T  # (N,A)
    box_r = half @ np.abs(axes).T  # (N,A)
    sv = slab_verts @ axes.T  # (S,A)
    smin, smax = sv.min(axis=0), sv.max(axis=0)
    separated = (box_c + box_r < smin) | (box_c - box_r > smax)  # (N,A)
    return ~separated.any(axis=1)


# ---------------------------------------------------------------------------
# Planar convex polygon operations (vertices given as ordered 3D points)
# ---------------------------------------------------------------------------


def polygon_to_2d(polygon: np.ndarray, normal: np.ndarray):
    """Project a planar polygon to 2D coordinates. Returns (pts2d, origin, e1, e2)."""
    e1, e2 = plane_basis(unit(normal))
    origin = polygon[0]
    rel = polygon - origin
    return np.column_stack([rel @ e1, rel @ e2]), origin, e1, e2


def polygon_from_2d(pts2d: np.ndarray, origin: np.ndarray, e1: np.ndarray, e2: np.ndarray) -> np.ndarray:
    return origin + pts2d[:, [0]] * e1 + pts2d[:, [1]] * e2


def shoelace_area(pts2d: np.ndarray) -> float:
    x, y = pts2d[:, 0], pts2d[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_area_3d(polygon: np.ndarray, normal: np.ndarray) -> float:
    pts2d, *_ = polygon_to_2d(polygon, normal)
    return abs(shoelace_area(pts2d))


def ensure_ccw(pts2d: np.ndarray) -> np.ndarray:
    return pts2d if shoelace_area(pts2d) >= 0 else pts2d[::-1]


def is_convex_ccw(pts2d: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff the CCW-ordered 2D polygon is convex (collinear runs allowed)."""
    n = len(pts2d)
    if n < 3:
        return False
    prev = pts2d - np.roll(pts2d, 1, axis=0)
    nxt = np.roll(pts2d, -1, axis=0) - pts2d
    cross = prev[:, 0] * nxt[:, 1] - prev[:, 1] * nxt[:, 0]
    return bool(np.all(cross >= -tol))


def prune_collinear(pts2d: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Drop vertices that lie on the segment joining their neighbours."""
    keep = []
    n = len(pts2d)
    for i in range(n):
        a, b, c = pts2d[i - 1], pts2d[i], pts2d[(i + 1) % n]
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(cross) > tol:
            keep.append(i)
    if len(keep) < 3:
        return pts2d
    return pts2d[keep]


def clip_halfplane(pts2d: np.ndarray, n2: np.ndarray, d: float, tol: float = 1e-12):
    """Sutherland-Hodgman clip of a convex polygon against n2 . x <= d."""
    out = []
    n = len(pts2d)
    vals = pts2d @ n2 - d
    for i in range(n):
        j = (i + 1) % n
        vi, vj = vals[i], vals[j]
        if vi <= tol:
            out.append(pts2d[i])
        if (vi < -tol and vj > tol) or (vi > tol and vj < -tol):
            t = vi / (vi - vj)
            out.append(pts2d[i] + t * (pts2d[j] - pts2d[i]))
    if len(out) < 3:
        return None
    return np.asarray(out)


def inset_polygon_2d(pts2d: np.ndarray, margin: float):
    """Inward offset of a convex CCW polygon by `margin` (half-plane shifts).

    Returns the inset polygon or None if the offset annihilates it.
    """
    if margin == 0.0:
        return pts2d.copy()
    result = pts2d
    n = len(pts2d)
    for i in range(n):
        a, b = pts2d[i], pts2d[(i + 1) % n]
        e = b - a
        elen = np.linalg.norm(e)
        if elen < 1e-12:
            continue
        # outward normal of a CCW edge is (ey, -ex)
        n2 = np.array([e[1], -e[0]]) / elen
        d = n2 @ a - margin
        result = clip_halfplane(result, n2, d)
        if result is None:
            return None
        if abs(shoelace_area(result)) < 1e-12:
            return None
    return prune_collinear(result)


def point_in_convex_2d(p: np.ndarray, pts2d: np.ndarray, tol: float = 1e-9) -> bool:
    a = pts2d
    b = np.roll(pts2d, -1, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])
    return bool(np.all(cross >= -tol))


def closest_point_on_segments_2d(p: np.ndarray, pts2d: np.ndarray) -> np.ndarray:
    """Closest point to p on the closed polyline boundary of a 2D polygon."""
    a = pts2d
    b = np.roll(pts2d, -1, axis=0)
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom < 1e-30] = 1.0
    t = np.clip(np.einsum("ij,j->i", ab, p) - np.einsum("ij,ij->i", ab, a), 0.0, denom) / denom
    cand = a + ab * t[:, None]
    d2 = ((cand - p) ** 2).sum(axis=1)
    return cand[np.argmin(d2)]


def signed_distance_convex_2d(p: np.ndarray, pts2d: np.ndarray) -> float:
    """Signed Euclidean distance to the polygon boundary: positive inside."""
    ccw = ensure_ccw(pts2d)
    a = ccw
    b = np.roll(ccw, -1, axis=0)
    ab = b - a
    lens = np.linalg.norm(ab, axis=1)
    lens[lens < 1e-30] = 1.0
    inward = np.column_stack([-ab[:, 1], ab[:, 0]]) / lens[:, None]
    dists = np.einsum("ij,ij->i", inward, p - a)
    if np.all(dists >= 0):
        return float(dists.min())
    boundary = closest_point_on_segments_2d(p, ccw)
    return -float(np.linalg.norm(boundary - p))


# ---------------------------------------------------------------------------
# Segments vs triangle meshes
# ---------------------------------------------------------------------------


def segments_hit_triangles(p0: np.ndarray, p1: np.ndarray, tri_verts: np.ndarray, eps: float = 1e-12):
    """Moller-Trumbore segment/triangle intersection for S segments vs N triangles.

    Returns (seg_idx, points) arrays for every hit. Segments lying exactly in a
    triangle's plane (parallel case) report no hit, which is the behaviour we
    want for arcs that only graze a surface tangentially at their endpoints.
    """
    p0 = np.atleast_2d(p0)
    p1 = np.atleast_2d(p1)
    if len(tri_verts) == 0:
        return np.zeros(0, dtype=int), np.zeros((0, 3))
    d = p1 - p0  # (S,3)
    v0 = tri_verts[:, 0]
    e1 = tri_verts[:, 1] - v0  # (N,3)
    e2 = tri_verts[:, 2] - v0
    # broadcast S x N
    h = np.cross(d[:, None, :], e2[None, :, :])  # (S,N,3)
    a = np.einsum("nj,snj->sn", e1, h)
    ok = np.abs(a) > eps
    a_safe = np.where(ok, a, 1.0)
    s = p0[:, None, :] - v0[None, :, :]
    u = np.einsum("snj,snj->sn", s, h) / a_safe
    q = np.cross(s, e1[None, :, :])
    v = np.einsum("sj,snj->sn", d, q) / a_safe
    t = np.einsum("nj,snj->sn", e2, q) / a_safe
    hit = ok & (u >= -eps) & (v >= -eps) & (u + v <= 1 + eps) & (t >= -eps) & (t <= 1 + eps)
    seg_idx, tri_idx = np.nonzero(hit)
    pts = p0[seg_idx] + t[seg_idx, tri_idx, None] * d[seg_idx]
    return seg_idx, pts


def point_triangle_distances(points: np.ndarray, tri_verts: np.ndarray) -> np.ndarray:
    """Min distance from each of P points to a set of N triangles. Returns (P,)."""
    points = np.atleast_2d(points)
    a, b, c = tri_verts[:, 0], tri_verts[:, 1], tri_verts[:, 2]
    ab, ac = b - a, c - a
    nrm = np.cross(ab, ac)
    nn = np.einsum("ij,ij->i", nrm, nrm)
    nn[nn < 1e-30] = 1.0
    best = np.full(len(points), np.inf)
    for i, p in enumerate(points):
        ap = p - a
        t = np.einsum("ij,ij->i", ap, nrm) / nn
        proj = p - t[:, None] * nrm
        # barycentric test of the projection
        d00 = np.einsum("ij,ij->i", ab, ab)
        d01 = np.einsum("ij,ij->i", ab, ac)
        d11 = np.einsum("ij,ij->i", ac, ac)
        d20 = np.einsum("ij,ij->i", proj - a, ab)
        d21 = np.einsum("ij,ij->i", proj - a, ac)
        denom = d00 * d11 - d01 * d01
        denom[np.abs(denom) < 1e-30] = 1.0
        v = (d11 * d20 - d01 * d21) / denom
        w = (d00 * d21 - d01 * d20) / denom
        inside = (v >= 0) & (w >= 0) & (v + w <= 1)
        d_face = np.where(inside, np.abs(t) * np.sqrt(nn), np.inf)
        d_edges = np.min(
            [
                _point_segment_distance(p, a, b),
                _point_segment_distance(p, b, c),
                _point_segment_distance(p, c, a),
            ],
            axis=0,
        )
        best[i] = min(d_face.min(), d_edges.min())
    return best


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom < 1e-30] = 1.0
    t = np.clip(np.einsum("ij,j->i", ab, p) - np.einsum("ij,ij->i", ab, a), 0.0, denom) / denom
    closest = a + ab * t[:, None]
    return np.linalg.norm(closest - p, axis=1)


__all__ = [
    "ConvexPolytope",
    "QhullError",
    "boxes_intersect_slab",
    "clip_halfplane",
    "closest_point_on_segments_2d",
    "convex_intersect",
    "ensure_ccw",
    "inset_polygon_2d",
    "is_convex_ccw",
    "make_box",
    "plane_basis",
    "point_in_convex_2d",
    "point_triangle_distances",
    "polygon_area_3d",
    "polygon_from_2d",
    "polygon_to_2d",
    "polytope_intersects_polygon",
    "polytope_intersects_triangles",
    "prune_collinear",
    "segments_hit_triangles",
    "shoelace_area",
    "signed_distance_convex_2d",
    "unit",
    "yaw_matrix",
]
