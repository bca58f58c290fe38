"""Extraction of contact-capable surfaces from terrain meshes.

The extractor merges adjacent coplanar triangles into planar patches, turns
each patch into one or more convex polygons, filters by inclination and area,
and optionally insets every polygon away from its boundary so feet are never
placed on an edge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .mesh import TriMesh

MERGE_ANGLE_TOL = np.deg2rad(1.0)  # normals within 1 degree merge
MERGE_PLANE_TOL = 1e-3  # plane offsets within 1 mm merge


@dataclass(frozen=True)
class AffordanceParams:
    theta_max: float = np.deg2rad(25.0)
    a_min: float = 0.01
    edge_margin: float = 0.03

    def __post_init__(self):
        if not 0.0 < self.theta_max < np.pi / 2:
            raise ValueError("theta_max must be in (0, pi/2)")
        if self.a_min <= 0.0:
            raise ValueError("a_min must be positive")
        if self.edge_margin < 0.0:
            raise ValueError("edge_margin must be non-negative")


@dataclass(frozen=True)
class AffordanceSurface:
    """Convex planar polygon usable for foot contact."""

    id: int
    polygon: np.ndarray  # (K, 3) ordered CCW about the normal
    normal: np.ndarray  # unit
    area: float

    def plane_offset(self) -> float:
        return float(self.normal @ self.polygon[0])


def _union_find_patches(mesh: TriMesh) -> list[np.ndarray]:
    """Group triangles into connected patches of near-coplanar neighbours."""
    m = len(mesh.triangles)
    normals = mesh.triangle_normals()
    tv = mesh.tri_verts
    offsets = np.einsum("ij,ij->i", normals, tv[:, 0])

    parent = np.arange(m)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    edge_map: dict[tuple[int, int], int] = {}
    cos_tol = np.cos(MERGE_ANGLE_TOL)
    for t, tri in enumerate(mesh.triangles):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(min(a, b)), int(max(a, b)))
            other = edge_map.setdefault(key, t)
            if other == t:
                continue
            if normals[t] @ normals[other] < cos_tol:
                continue
            # every vertex of each triangle must lie near the other's plane
            if np.abs(tv[other] @ normals[t] - offsets[t]).max() > MERGE_PLANE_TOL:
                continue
            if np.abs(tv[t] @ normals[other] - offsets[other]).max() > MERGE_PLANE_TOL:
                continue
            ra, rb = find(t), find(other)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(m)])
    patches = []
    for r in np.unique(roots):
        patches.append(np.nonzero(roots == r)[0])
    patches.sort(key=lambda idx: int(idx.min()))
    return patches


def _boundary_loops(tris: np.ndarray) -> list[list[int]] | None:
    """Directed boundary loops of a triangle patch, or None if the walk fails."""
    counts: dict[tuple[int, int], int] = {}
    directed: dict[int, int] = {}
    for tri in tris:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(min(a, b)), int(max(a, b)))
            counts[key] = counts.get(key, 0) + 1
    for tri in tris:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(min(a, b)), int(max(a, b)))
            if counts[key] == 1:
                if int(a) in directed:
                    return None  # non-manifold boundary vertex
                directed[int(a)] = int(b)
    loops = []
    remaining = dict(directed)
    while remaining:
        start = min(remaining)
        loop = [start]
        cur = remaining.pop(start)
        while cur != start:
            loop.append(cur)
            if cur not in remaining:
                return None
            cur = remaining.pop(cur)
        loops.append(loop)
    return loops


class _PolyMerge:
    """Greedy convex re-merge of a set of polygons sharing edges.

    Starts from triangles (either a patch's own, or an ear-clip triangulation)
    and repeatedly unions edge-adjacent polygons while the union stays convex.
    """

    def __init__(self, pts2d: np.ndarray, polys: list[list[int]]):
        self.pts = pts2d
        self.polys = [list(p) for p in polys]

    def _shared_chain(self, p1: list[int], p2: list[int]):
        """Find the contiguous chain of edges shared by p1 and p2.

        Returns (u, v) such that walking p1 from u leads along the chain to v,
        or None when the shared set is empty or not a single chain.
        """
        edges2 = {(min(a, b), max(a, b)) for a, b in zip(p2, p2[1:] + p2[:1])}
        n1 = len(p1)
        flags = [
            (min(p1[i], p1[(i + 1) % n1]), max(p1[i], p1[(i + 1) % n1])) in edges2
            for i in range(n1)
        ]
        total = sum(flags)
        if total == 0 or total == n1:
            return None
        # chain must be one contiguous run of True cyclically
        runs = sum(1 for i in range(n1) if flags[i] and not flags[i - 1])
        if runs != 1:
            return None
        start = next(i for i in range(n1) if flags[i] and not flags[i - 1])
        end = start
        while flags[end % n1]:
            end += 1
        return start % n1, end % n1  # chain occupies edges start..end-1

    def _try_union(self, p1: list[int], p2: list[int]):
        chain = self._shared_chain(p1, p2)
        if chain is None:
            return None
        i_u, i_v = chain
        u, v = p1[i_u], p1[i_v]
        n1, n2 = len(p1), len(p2)
        # p1 long way: v -> u inclusive
        part1 = [p1[(i_v + k) % n1] for k in range((i_u - i_v) % n1 + 1)]
        # p2 long way: u -> v exclusive of endpoints
        j_u = p2.index(u)
        j_v = p2.index(v)
        part2 = [p2[(j_u + k) % n2] for k in range(1, (j_v - j_u) % n2)]
        merged = part1 + part2
        if len(set(merged)) != len(merged):
            return None
        if not geo.is_convex_ccw(self.pts[merged]):
            return None
        return merged

    def run(self) -> list[list[int]]:
        changed = True
        while changed:
            changed = False
            adj: dict[tuple[int, int], list[int]] = {}
            for pi, poly in enumerate(self.polys):
                for a, b in zip(poly, poly[1:] + poly[:1]):
                    adj.setdefault((min(a, b), max(a, b)), []).append(pi)
            seen = set()
            for key in sorted(adj):
                owners = adj[key]
                if len(owners) != 2:
                    continue
                pa, pb = owners
                if pa == pb or (pa, pb) in seen:
                    continue
                seen.add((pa, pb))
                merged = self._try_union(self.polys[pa], self.polys[pb])
                if merged is not None:
                    self.polys[pa] = merged
                    del self.polys[pb]
                    changed = True
                    break
        return self.polys


def _earclip(loop: list[int], pts2d: np.ndarray) -> list[list[int]] | None:
    """Triangulate a simple CCW polygon by ear clipping; None on failure."""
    idx = list(loop)
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10000:
            return None
        n = len(idx)
        clipped = False
        for i in range(n):
            a, b, c = idx[i - 1], idx[i], idx[(i + 1) % n]
            pa, pb, pc = pts2d[a], pts2d[b], pts2d[c]
            cross = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
            if cross <= 1e-12:
                continue  # reflex or degenerate corner
            ear = np.array([pa, pb, pc])
            ok = True
            for j in idx:
                if j in (a, b, c):
                    continue
                if geo.point_in_convex_2d(pts2d[j], ear, tol=-1e-12):
                    ok = False
                    break
            if ok:
                tris.append([a, b, c])
                del idx[i]
                clipped = True
                break
        if not clipped:
            return None
    tris.append(list(idx))
    return tris


def _patch_polygons(mesh: TriMesh, patch: np.ndarray, normal: np.ndarray,
                    anchor: np.ndarray) -> list[np.ndarray]:
    """Decompose one planar patch into convex polygons (2D index lists -> 3D)."""
    tris = mesh.triangles[patch]
    vids = np.unique(tris)
    # project patch vertices onto the fitted plane, then to 2D
    pts3 = mesh.vertices[vids]
    pts3 = pts3 - np.outer((pts3 - anchor) @ normal, normal)
    e1, e2 = geo.plane_basis(normal)
    pts2 = np.column_stack([(pts3 - anchor) @ e1, (pts3 - anchor) @ e2])
    local = {int(v): i for i, v in enumerate(vids)}
    ltris = np.array([[local[int(a)], local[int(b)], local[int(c)]] for a, b, c in tris])
    # orient every triangle CCW in the projection
    for t in ltris:
        pa, pb, pc = pts2[t[0]], pts2[t[1]], pts2[t[2]]
        if (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]) < 0:
            t[1], t[2] = t[2], t[1]

    loops = _boundary_loops(ltris)
    polys = None
    if loops is not None and len(loops) == 1:
        loop = loops[0]
        loop_pts = pts2[loop]
        if geo.shoelace_area(loop_pts) < 0:
            loop = loop[::-1]
            loop_pts = pts2[loop]
        if geo.is_convex_ccw(loop_pts):
            polys = [loop]
        else:
            tri_fan = _earclip(loop, pts2)
            if tri_fan is not None:
                polys = _PolyMerge(pts2, tri_fan).run()
    if polys is None:
        # holes or a non-manifold boundary: merge the raw triangles instead
        polys = _PolyMerge(pts2, [list(map(int, t)) for t in ltris]).run()

    out = []
    for poly in polys:
        p2 = geo.prune_collinear(pts2[poly])
        if len(p2) < 3 or abs(geo.shoelace_area(p2)) < 1e-12:
            continue
        p2 = geo.ensure_ccw(p2)
        out.append(anchor + p2[:, [0]] * e1 + p2[:, [1]] * e2)
    return out


def extract_affordances(mesh: TriMesh, params: AffordanceParams) -> list[AffordanceSurface]:
    """All contact-capable surfaces of a terrain mesh.

    Adjacent coplanar triangles are merged first, then each patch is cut into
    convex polygons, inset by `edge_margin`, and filtered by inclination
    (angle to +z at most theta_max) and minimum area.
    """
    if len(mesh.triangles) == 0:
        return []
    normals = mesh.triangle_normals()
    areas = mesh.triangle_areas()
    surfaces = []
    next_id = 0
    for patch in _union_find_patches(mesh):
        w = areas[patch][:, None]
        mean_n = (normals[patch] * w).sum(axis=0)
        nlen = np.linalg.norm(mean_n)
        if nlen < 1e-12:
            continue
        mean_n = mean_n / nlen
        if float(np.arccos(np.clip(mean_n[2], -1.0, 1.0))) > params.theta_max:
            continue
        anchor = (mesh.tri_verts[patch].mean(axis=1) * w).sum(axis=0) / w.sum()
        for polygon in _patch_polygons(mesh, patch, mean_n, anchor):
            surf = AffordanceSurface(
                id=next_id,
                polygon=polygon,
                normal=mean_n,
                area=geo.polygon_area_3d(polygon, mean_n),
            )
            if params.edge_margin > 0.0:
                surf = inset_surface(surf, params.edge_margin)
                if surf is None:
                    continue
            if surf.area < params.a_min:
                continue
            surf = AffordanceSurface(next_id, surf.polygon, surf.normal, surf.area)
            surfaces.append(surf)
            next_id += 1
    return surfaces


def inset_surface(surface: AffordanceSurface, margin: float) -> AffordanceSurface | None:
    """Offset the polygon inward by `margin`; None if nothing is left."""
    if margin < 0.0:
        raise ValueError("margin must be non-negative")
    pts2, origin, e1, e2 = geo.polygon_to_2d(surface.polygon, surface.normal)
    pts2 = geo.ensure_ccw(pts2)
    inner = geo.inset_polygon_2d(pts2, margin)
    if inner is None or len(inner) < 3:
        return None
    polygon = geo.polygon_from_2d(inner, origin, e1, e2)
    return AffordanceSurface(
        id=surface.id,
        polygon=polygon,
        normal=surface.normal,
        area=abs(geo.shoelace_area(inner)),
    )


def project_point(surface: AffordanceSurface, p) -> np.ndarray:
    """Closest point to p that lies on the surface polygon (plane + interior)."""
    p = np.asarray(p, dtype=float)
    pts2, origin, e1, e2 = geo.polygon_to_2d(surface.polygon, surface.normal)
    pts2 = geo.ensure_ccw(pts2)
    rel = p - origin
    q2 = np.array([rel @ e1, rel @ e2])
    if not geo.point_in_convex_2d(q2, pts2):
        q2 = geo.closest_point_on_segments_2d(q2, pts2)
    return origin + q2[0] * e1 + q2[1] * e2


def surface_distance(surface: AffordanceSurface, p) -> float:
    return float(np.linalg.norm(project_point(surface, p) - np.asarray(p, dtype=float)))


def nearest_surface(surfaces, p):
    """(surface, projected point) minimizing distance to p. None when empty."""
    best = None
    best_d = np.inf
    best_q = None
    for s in surfaces:
        q = project_point(s, p)
        d = float(np.linalg.norm(q - np.asarray(p, dtype=float)))
        if d < best_d - 1e-12:
            best, best_d, best_q = s, d, q
    if best is None:
        return None
    return best, best_q


def dump_affordances(surfaces, path=None) -> str:
    """Serialize surfaces to versioned JSON text (and optionally a file)."""
    doc = {
        "format": "affordances",
        "version": 1,
        "surfaces": [
            {
                "id": int(s.id),
                "normal": [float(x) for x in s.normal],
                "area": float(s.area),
                "polygon": [[float(c) for c in v] for v in s.polygon],
            }
            for s in surfaces
        ],
    }
    text = json.dumps(doc, indent=1, sort_keys=True)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


def load_affordances(path) -> list[AffordanceSurface]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "affordances" or doc.get("version") != 1:
        raise ValueError("not an affordance file (or unsupported version)")
    return [
        AffordanceSurface(
            id=int(s["id"]),
            polygon=np.array(s["polygon"], dtype=float),
            normal=np.array(s["normal"], dtype=float),
            area=float(s["area"]),
        )
        for s in doc["surfaces"]
    ]
