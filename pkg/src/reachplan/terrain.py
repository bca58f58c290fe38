"""Procedural benchmark terrains.

Four families, in increasing difficulty for a quasi-static walker:

- ``flat``: a horizontal plane, grid-subdivided so surface extraction has
  real merging work to do.
- ``slalom``: a plane plus staggered chest-height boxes that block the
  straight line and force lateral detours.
- ``plinth``: an ascending staircase of flat plateaus with large height
  variation between them.
- ``rubble``: a field of tilted planks with varied heights between two flat
  pads, all tilts bounded so the planks stay within the walkable slope.

All generators are deterministic functions of their parameters and the seed;
only ``rubble`` actually consumes random numbers.
"""

from __future__ import annotations

import inspect

import numpy as np

from .errors import InvalidSpec
from .geometry import segments_hit_triangles
from .mesh import TriMesh, make_mesh

TERRAIN_KINDS = ("flat", "slalom", "plinth", "rubble")


def _grid_plane(x0, x1, y0, y1, z, nx, ny, flip=False):
    """Triangulated rectangle in the z=const plane, (nx, ny) cells."""
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(z))])
    tris = []
    for i in range(nx):
        for j in range(ny):
            a = i * (ny + 1) + j
            b = (i + 1) * (ny + 1) + j
            tris.append((a, b, b + 1))
            tris.append((a, b + 1, a + 1))
    tris = np.array(tris, dtype=np.int64)
    if flip:
        tris = tris[:, ::-1]
    return verts, tris


def _quad(p0, p1, p2, p3):
    """Two triangles for the (counter-clockwise) quad p0 p1 p2 p3."""
    verts = np.array([p0, p1, p2, p3], dtype=float)
    tris = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)
    return verts, tris


def _box(center, size):
    """Closed axis-aligned box, outward normals."""
    c = np.asarray(center, dtype=float)
    h = np.asarray(size, dtype=float) / 2.0
    corners = c + h * np.array([
        [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
        [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
    ])
    quads = [
        (0, 3, 2, 1),  # bottom
        (4, 5, 6, 7),  # top
        (0, 1, 5, 4),  # front (-y)
        (2, 3, 7, 6),  # back (+y)
        (1, 2, 6, 5),  # +x
        (3, 0, 4, 7),  # -x
    ]
    tris = []
    for a, b, cc, d in quads:
        tris.append((a, b, cc))
        tris.append((a, cc, d))
    return corners, np.array(tris, dtype=np.int64)


def _accumulate(parts):
    verts = []
    tris = []
    base = 0
    for v, t in parts:
        verts.append(v)
        tris.append(t + base)
        base += len(v)
    return make_mesh(np.vstack(verts), np.vstack(tris))


def _require_positive(kind, **vals):
    for k, v in vals.items():
        if not v > 0:
            raise InvalidSpec(f"{kind}: parameter {k} must be positive, got {v}")


def flat_terrain(length=5.0, width=2.0, cell=0.5) -> TriMesh:
    _require_positive("flat", length=length, width=width, cell=cell)
    nx = max(int(round(length / cell)), 1)
    ny = max(int(round(width / cell)), 1)
    return _accumulate([_grid_plane(0.0, length, -width / 2, width / 2, 0.0, nx, ny)])


def slalom_terrain(length=8.0, width=3.2, obstacles=3, obstacle_height=0.3,
                   gap=1.5, obstacle_depth=0.4) -> TriMesh:
    _require_positive("slalom", length=length, width=width, obstacles=obstacles,
                      obstacle_height=obstacle_height, gap=gap,
                      obstacle_depth=obstacle_depth)
    if gap >= width:
        raise InvalidSpec("slalom: gap must be narrower than the corridor")
    parts = [_grid_plane(0.0, length, -width / 2, width / 2, 0.0,
                         max(int(round(length / 0.5)), 1),
                         max(int(round(width / 0.5)), 1))]
    span = width - gap  # how far each box reaches across the corridor
    for k in range(int(obstacles)):
        x = (k + 1) * length / (obstacles + 1)
        if k % 2 == 0:
            yc = width / 2 - span / 2  # blocks the left side, gap on the right
        else:
            yc = -width / 2 + span / 2
        parts.append(_box(
            (x, yc, obstacle_height / 2),
            (obstacle_depth, span, obstacle_height),
        ))
    return _accumulate(parts)


def plinth_terrain(levels=6, rise=0.1, run=0.8, width=2.5) -> TriMesh:
    _require_positive("plinth", levels=levels, rise=rise, run=run, width=width)
    levels = int(levels)
    y0, y1 = -width / 2, width / 2
    parts = []
    for k in range(levels):
        x0, x1 = k * run, (k + 1) * run
        z = k * rise
        parts.append(_grid_plane(x0, x1, y0, y1, z,
                                 max(int(round(run / 0.4)), 1),
                                 max(int(round(width / 0.4)), 1)))
        if k > 0:
            # riser between plateau k-1 and k, facing -x
            zb, zt = (k - 1) * rise, k * rise
            parts.append(_quad(
                (x0, y0, zb), (x0, y0, zt), (x0, y1, zt), (x0, y1, zb)
            ))
    return _accumulate(parts)


def rubble_terrain(length=7.0, width=2.4, pad=1.2, pitch=0.34,
                   plank_min=0.24, plank_max=0.32, tilt_deg=15.0,
                   z_var=0.1, seed=0) -> TriMesh:
    _require_positive("rubble", length=length, width=width, pad=pad,
                      pitch=pitch, plank_min=plank_min, plank_max=plank_max,
                      tilt_deg=tilt_deg)
    if z_var < 0:
        raise InvalidSpec("rubble: z_var must be non-negative")
    if 2 * pad >= length:
        raise InvalidSpec("rubble: pads leave no room for the plank field")
    rng = np.random.default_rng(seed)
    parts = [
        _grid_plane(0.0, pad, -width / 2, width / 2, 0.0, 3, 4),
        _grid_plane(length - pad, length, -width / 2, width / 2, 0.0, 3, 4),
    ]
    xs = np.arange(pad + pitch / 2, length - pad, pitch)
    ys = np.arange(-width / 2 + pitch / 2, width / 2, pitch)
    tilt_max = np.radians(tilt_deg)
    for xc in xs:
        for yc in ys:
            sx = rng.uniform(plank_min, plank_max)
            sy = rng.uniform(plank_min, plank_max)
            zc = rng.uniform(0.0, z_var)
            roll = rng.uniform(-tilt_max, tilt_max)
            pitch_a = rng.uniform(-tilt_max, tilt_max)
            jx = rng.uniform(-0.2, 0.2) * (pitch - sx)
            jy = rng.uniform(-0.2, 0.2) * (pitch - sy)
            # plank = tilted rectangle (two triangles)
            cr, sr = np.cos(roll), np.sin(roll)
            cp, sp = np.cos(pitch_a), np.sin(pitch_a)
            rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
            ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
            rot = ry @ rx
            local = np.array([
                [-sx / 2, -sy / 2, 0], [sx / 2, -sy / 2, 0],
                [sx / 2, sy / 2, 0], [-sx / 2, sy / 2, 0],
            ])
            corners = local @ rot.T + np.array([xc + jx, yc + jy, zc])
            parts.append((corners, np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)))
    return _accumulate(parts)


_GENERATORS = {
    "flat": flat_terrain,
    "slalom": slalom_terrain,
    "plinth": plinth_terrain,
    "rubble": rubble_terrain,
}


def generate_terrain(kind: str, seed: int = 0, **dims) -> TriMesh:
    """Build one of the benchmark terrains. Unknown kinds or parameters
    raise InvalidSpec; every generator is deterministic per seed."""
    if kind not in _GENERATORS:
        raise InvalidSpec(
            f"unknown terrain kind {kind!r} (expected one of {', '.join(TERRAIN_KINDS)})"
        )
    gen = _GENERATORS[kind]
    allowed = set(inspect.signature(gen).parameters)
    unknown = set(dims) - allowed
    if unknown:
        raise InvalidSpec(f"{kind}: unknown parameters {sorted(unknown)}")
    try:
        if "seed" in allowed:
            return gen(seed=seed, **dims)
        return gen(**dims)
    except InvalidSpec:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidSpec(f"{kind}: {exc}") from exc


def terrain_height(mesh: TriMesh, x: float, y: float) -> float:
    """Highest terrain point under/over (x, y), via a vertical ray."""
    tv = mesh.tri_verts
    lo = float(mesh.vertices[:, 2].min()) - 1.0
    hi = float(mesh.vertices[:, 2].max()) + 1.0
    p0 = np.array([[x, y, hi]])
    p1 = np.array([[x, y, lo]])
    _, pts = segments_hit_triangles(p0, p1, tv)
    if len(pts) == 0:
        raise InvalidSpec(f"no terrain under ({x:.3f}, {y:.3f})")
    return float(pts[:, 2].max())
