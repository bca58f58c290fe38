"""Scene export: one OBJ file carrying terrain, contact surfaces, footholds,
and the root path, loadable in any standard mesh viewer.

Footholds are small octahedral markers, one group per limb (``g footholds_LF``
etc. with a matching ``usemtl``), so viewers that auto-assign materials show
each leg's contacts in its own color. Contact surfaces are drawn as thin
overlays lifted slightly off the terrain along their normals to avoid
z-fighting. The root path is an OBJ polyline.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh
from .robot import LIMB_ORDER

SURFACE_LIFT = 0.002
MARKER_RADIUS = 0.02

_OCTA = np.array([
    [1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1],
], dtype=float)
_OCTA_FACES = np.array([
    [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
    [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
])


def _fmt(x: float) -> str:
    return repr(round(float(x), 9))


class _ObjWriter:
    def __init__(self):
        self.lines = []
        self.n_verts = 0

    def comment(self, text):
        self.lines.append(f"# {text}")

    def group(self, name, material=None):
        self.lines.append(f"g {name}")
        if material:
            self.lines.append(f"usemtl {material}")

    def add_vertices(self, verts):
        base = self.n_verts
        for v in np.asarray(verts, dtype=float):
            self.lines.append(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
        self.n_verts += len(verts)
        return base

    def add_faces(self, faces, base):
        for f in faces:
            idx = " ".join(str(base + int(i) + 1) for i in f)
            self.lines.append(f"f {idx}")

    def add_polyline(self, pts):
        base = self.add_vertices(pts)
        idx = " ".join(str(base + i + 1) for i in range(len(pts)))
        self.lines.append(f"l {idx}")

    def text(self):
        return "\n".join(self.lines) + "\n"


def export_scene(path, env: TriMesh, surfaces=(), plan=None, root_path=None):
    """Write the scene OBJ. With plan=None only the terrain (and surfaces,
    if given) is exported."""
    w = _ObjWriter()
    w.comment("contact-planning scene")

    w.group("terrain")
    base = w.add_vertices(env.vertices)
    w.add_faces(env.triangles, base)

    if len(surfaces):
        w.group("affordances", "affordance")
        for s in surfaces:
            lifted = s.polygon + SURFACE_LIFT * s.normal
            base = w.add_vertices(lifted)
            w.add_faces([list(range(len(lifted)))], base)

    if plan is not None and plan.stances:
        placed = _contacts_in_order(plan)
        for limb_id in LIMB_ORDER:
            w.group(f"footholds_{limb_id}", f"leg_{limb_id}")
            for c in placed[limb_id]:
                base = w.add_vertices(MARKER_RADIUS * _OCTA + c.position)
                w.add_faces(_OCTA_FACES, base)

        w.group("root_path", "root_path")
        if root_path is not None:
            pts, _ = root_path.discretize(0.1)
            w.add_polyline(np.array([s.position for s in pts]))
        else:
            w.add_polyline(np.array([s.root_position for s in plan.stances]))

    with open(path, "w", encoding="ascii") as fh:
        fh.write(w.text())


def _contacts_in_order(plan):
    """Every contact the plan ever placed: the four initial ones plus one
    per step, keyed by limb."""
    placed = {lid: [c] for lid, c in zip(LIMB_ORDER, plan.stances[0].contacts)}
    for prev, cur, rec in zip(plan.stances, plan.stances[1:], plan.step_log):
        idx = LIMB_ORDER.index(rec.limb_id)
        placed[rec.limb_id].append(cur.contacts[idx])
    return placed


def marker_count(plan) -> int:
    if plan is None or not plan.stances:
        return 0
    placed = _contacts_in_order(plan)
    return sum(len(v) for v in placed.values())
