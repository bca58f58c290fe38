"""Triangle-mesh container and loaders (ASCII OBJ, binary STL)."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

DEGENERATE_AREA = 1e-9


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle soup. Vertices in meters, triangles as index triples.

    `dropped` counts degenerate triangles removed on load or construction.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    dropped: int = 0
    _tri_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ParseError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def tri_verts(self) -> np.ndarray:
        """(M, 3, 3) triangle corner positions."""
        if "tv" not in self._tri_cache:
            self._tri_cache["tv"] = self.vertices[self.triangles]
        return self._tri_cache["tv"]

    def triangle_areas(self) -> np.ndarray:
        tv = self.tri_verts
        return 0.5 * np.linalg.norm(
            np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0]), axis=1
        )

    def triangle_normals(self) -> np.ndarray:
        tv = self.tri_verts
        n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
        lens = np.linalg.norm(n, axis=1)
        lens[lens < 1e-30] = 1.0
        return n / lens[:, None]

    def aabb(self) -> np.ndarray:
        return np.array([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    def merged_with(self, other: "TriMesh") -> "TriMesh":
        tris = np.vstack([self.triangles, other.triangles + len(self.vertices)])
        return TriMesh(np.vstack([self.vertices, other.vertices]), tris,
                       self.dropped + other.dropped)


def make_mesh(vertices, triangles) -> TriMesh:
    """Build a TriMesh, welding duplicate vertices and dropping degenerate
    triangles (area <= 1e-9 m^2)."""
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    verts, inverse = np.unique(vertices, axis=0, return_inverse=True)
    tris = inverse[triangles]
    tv = verts[tris]
    areas = 0.5 * np.linalg.norm(np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0]), axis=1)
    keep = areas > DEGENERATE_AREA
    dropped = int((~keep).sum())
    if dropped:
        warnings.warn(f"dropped {dropped} degenerate triangle(s)", stacklevel=2)
    return TriMesh(verts, tris[keep], dropped)


def load_mesh(path) -> TriMesh:
    """Load an ASCII OBJ or binary STL file.

    Degenerate triangles are dropped (a warning reports the count). Raises
    FileNotFoundError for missing files and ParseError for malformed content.
    """
    path = str(path)
    lower = path.lower()
    if lower.endswith(".obj"):
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            return _parse_obj(fh)
    if lower.endswith(".stl"):
        with open(path, "rb") as fh:
            return _parse_stl(fh.read())
    raise ParseError(f"unrecognized mesh format: {path}")


def _parse_obj(fh) -> TriMesh:
    verts = []
    faces = []
    for lineno, raw in enumerate(fh, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ParseError(f"line {lineno}: vertex needs 3 coordinates")
            try:
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad vertex coordinate") from exc
        elif tag == "f":
            if len(parts) < 4:
                raise ParseError(f"line {lineno}: face needs at least 3 vertices")
            idx = []
            for token in parts[1:]:
                head = token.split("/")[0]
                try:
                    i = int(head)
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: bad face index {token!r}") from exc
                if i == 0:
                    raise ParseError(f"line {lineno}: OBJ indices are 1-based")
                idx.append(i - 1 if i > 0 else len(verts) + i)
            for k in range(1, len(idx) - 1):  # fan triangulation
                faces.append([idx[0], idx[k], idx[k + 1]])
        # vn/vt/o/g/usemtl/s/l records carry no contact geometry; skipped
    if not verts or not faces:
        raise ParseError("OBJ contains no usable geometry")
    for tri in faces:
        for i in tri:
            if i < 0 or i >= len(verts):
                raise ParseError(f"face index {i + 1} out of range")
    return make_mesh(np.array(verts), np.array(faces))


def _parse_stl(blob: bytes) -> TriMesh:
    if len(blob) < 84:
        raise ParseError("STL file truncated (missing header)")
    if blob[:5] == b"solid" and b"facet" in blob[:512]:
        raise ParseError("ASCII STL not supported; export binary STL")
    (count,) = struct.unpack_from("<I", blob, 80)
    expected = 84 + 50 * count
    if len(blob) < expected:
        raise ParseError(f"STL file truncated: {count} triangles declared, "
                         f"{(len(blob) - 84) // 50} present")
    raw = np.frombuffer(blob, dtype=np.uint8, count=50 * count, offset=84)
    rec = raw.reshape(count, 50)
    tri = rec[:, 12:48].copy().view("<f4").reshape(count, 3, 3).astype(float)
    verts = tri.reshape(-1, 3)
    faces = np.arange(3 * count, dtype=np.int64).reshape(count, 3)
    return make_mesh(verts, faces)


def save_obj(path, mesh: TriMesh, name: str = "terrain"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"o {name}\n")
        for v in mesh.vertices:
            fh.write(f"v {v[0]!r} {v[1]!r} {v[2]!r}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
