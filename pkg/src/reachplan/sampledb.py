"""Offline limb-configuration database indexed by foot position.

Samples are drawn once per robot, scored against the standing posture, and
bucketed into uniform cells keyed by integer foot coordinates (a flat spatial
hash with octree query semantics). Queries intersect the occupied cells with
terrain surfaces thickened along their normals and return candidate samples
sorted by their offline score.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import BudgetExceeded, DatabaseMismatch, ParseError
from .robot import LimbModel, RobotModel, limb_fk_batch, self_collision_mask

MAGIC = b"RPDB"
VERSION = 1


@dataclass(frozen=True)
class LimbSample:
    q: np.ndarray
    foot: np.ndarray
    offline_score: float


def offline_score(q, q_standing, weights):
    """Weighted squared joint-space distance to the standing configuration.

    Accepts a single configuration or an (n, 3) batch.
    """
    q = np.asarray(q, dtype=float)
    d2 = (q - np.asarray(q_standing, dtype=float)) ** 2
    out = d2 @ np.asarray(weights, dtype=float)
    return float(out) if q.ndim == 1 else out


@dataclass(frozen=True)
class SampleOctree:
    limb_id: str
    robot_hash: str
    cell_size: float
    seed: int
    weights: np.ndarray
    q: np.ndarray  # (n, 3)
    foot: np.ndarray  # (n, 3) trunk frame
    score: np.ndarray  # (n,)
    # spatial index (derived, rebuilt on load)
    cells: np.ndarray  # (n, 3) int cell coordinate per sample
    uniq: np.ndarray  # (u, 3) occupied cells
    start: np.ndarray  # (u + 1,) CSR offsets into `order`
    order: np.ndarray  # (n,) sample indices grouped by cell

    @property
    def n(self) -> int:
        return len(self.q)

    def sample(self, i: int) -> LimbSample:
        return LimbSample(self.q[i].copy(), self.foot[i].copy(), float(self.score[i]))

    def cell_bounds(self):
        lo = self.uniq * self.cell_size
        return lo, lo + self.cell_size

    def query_indices(self, trunk_position, trunk_yaw, surfaces) -> np.ndarray:
        """Indices of samples whose foot cell intersects any surface slab
        (polygon thickened by one cell size), sorted by offline score."""
        rot = geo.yaw_matrix(trunk_yaw)
        pos = np.asarray(trunk_position, dtype=float)
        lo, hi = self.cell_bounds()
        hit_cells = np.zeros(len(self.uniq), dtype=bool)
        for s in surfaces:
            poly_t = (s.polygon - pos) @ rot  # world -> trunk frame
            normal_t = s.normal @ rot
            pad = self.cell_size
            smin = poly_t.min(axis=0) - pad
            smax = poly_t.max(axis=0) + pad
            near = np.nonzero(
                ~hit_cells & np.all((hi >= smin) & (lo <= smax), axis=1)
            )[0]
            if len(near) == 0:
                continue
            mask = geo.boxes_intersect_slab(lo[near], hi[near], poly_t, normal_t, pad)
            hit_cells[near[mask]] = True
        picked = np.nonzero(hit_cells)[0]
        if len(picked) == 0:
            return np.zeros(0, dtype=np.int64)
        idx = np.concatenate([
            self.order[self.start[u]:self.start[u + 1]] for u in picked
        ])
        key = np.lexsort((idx, self.score[idx]))
        return idx[key]


def _index_cells(foot: np.ndarray, cell_size: float):
    cells = np.floor(foot / cell_size).astype(np.int64)
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    order = np.argsort(inverse, kind="stable").astype(np.int64)
    counts = np.bincount(inverse, minlength=len(uniq))
    start = np.zeros(len(uniq) + 1, dtype=np.int64)
    np.cumsum(counts, out=start[1:])
    return cells, uniq, start, order


def build_sample_db(limb: LimbModel, n: int, cell_size: float, weights=(1.0, 1.0, 1.0),
                    seed: int = 0, trunk_shape=None, robot_hash: str = "") -> SampleOctree:
    """Draw exactly n self-collision-free samples and index them.

    Rejected draws are replaced; if 100 * n draws are not enough the build
    aborts with BudgetExceeded.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    rng = np.random.default_rng(seed)
    lim = limb.joint_limits
    kept_q = []
    kept_foot = []
    total = 0
    drawn = 0
    while total < n:
        if drawn >= 100 * n:
            raise BudgetExceeded(
                f"{limb.id}: {total}/{n} samples after {drawn} draws"
            )
        chunk = min(n, 100 * n - drawn)
        Q = rng.uniform(lim[:, 0], lim[:, 1], size=(chunk, 3))
        drawn += chunk
        feet, knees = limb_fk_batch(limb, Q)
        if trunk_shape is not None:
            keep = ~self_collision_mask(trunk_shape, feet, knees)
            Q, feet = Q[keep], feet[keep]
        kept_q.append(Q)
        kept_foot.append(feet)
        total += len(Q)
    q = np.vstack(kept_q)[:n]
    foot = np.vstack(kept_foot)[:n]
    score = offline_score(q, limb.q_standing, weights)
    cells, uniq, start, order = _index_cells(foot, cell_size)
    return SampleOctree(
        limb_id=limb.id, robot_hash=robot_hash, cell_size=float(cell_size),
        seed=int(seed), weights=np.asarray(weights, dtype=float),
        q=q, foot=foot, score=score,
        cells=cells, uniq=uniq, start=start, order=order,
    )


def build_all_databases(robot: RobotModel, n: int, cell_size: float,
                        weights=(1.0, 1.0, 1.0), seed: int = 0) -> dict:
    h = robot.hash()
    return {
        l.id: build_sample_db(l, n, cell_size, weights, seed + i,
                              robot.trunk_shape, h)
        for i, l in enumerate(robot.limbs)
    }


def query_contact_candidates(db: SampleOctree, trunk_position, trunk_yaw,
                             surfaces) -> list:
    """LimbSample list for samples near any surface, best offline score first."""
    idx = db.query_indices(trunk_position, trunk_yaw, surfaces)
    return [db.sample(int(i)) for i in idx]


# ---------------------------------------------------------------------------
# Serialization: versioned binary blob, one block per limb
# ---------------------------------------------------------------------------


def save_databases(path, dbs: dict):
    limb_ids = sorted(dbs)
    first = dbs[limb_ids[0]]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<64s", first.robot_hash.encode()))
        fh.write(struct.pack("<I", len(limb_ids)))
        fh.write(struct.pack("<d", first.cell_size))
        fh.write(struct.pack("<3d", *first.weights))
        for lid in limb_ids:
            db = dbs[lid]
            fh.write(struct.pack("<4s", lid.encode().ljust(4)))
            fh.write(struct.pack("<QQ", db.n, db.seed))
            fh.write(np.ascontiguousarray(db.q, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(db.foot, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(db.score, dtype="<f8").tobytes())


def load_databases(path, robot_hash: str) -> dict:
    """Load a database file; refuses blobs built for a different robot."""
    with open(path, "rb") as fh:
        blob = fh.read()
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(blob):
            raise ParseError("database file truncated")
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    if take("<4s")[0] != MAGIC:
        raise ParseError("not a sample database file")
    (version,) = take("<I")
    if version != VERSION:
        raise ParseError(f"unsupported database version {version}")
    stored_hash = take("<64s")[0].decode()
    if stored_hash != robot_hash:
        raise DatabaseMismatch(
            "database was built for a different robot "
            f"({stored_hash[:12]}... != {robot_hash[:12]}...)"
        )
    (n_limbs,) = take("<I")
    (cell_size,) = take("<d")
    weights = np.array(take("<3d"))
    dbs = {}
    for _ in range(n_limbs):
        lid = take("<4s")[0].rstrip(b"\x00 ").decode()
        n, seed = take("<QQ")
        need = 7 * 8 * n
        if off + need > len(blob):
            raise ParseError("database file truncated")
        q = np.frombuffer(blob, dtype="<f8", count=3 * n, offset=off).reshape(n, 3).copy()
        off += 24 * n
        foot = np.frombuffer(blob, dtype="<f8", count=3 * n, offset=off).reshape(n, 3).copy()
        off += 24 * n
        score = np.frombuffer(blob, dtype="<f8", count=n, offset=off).copy()
        off += 8 * n
        cells, uniq, start, order = _index_cells(foot, cell_size)
        dbs[lid] = SampleOctree(
            limb_id=lid, robot_hash=stored_hash, cell_size=float(cell_size),
            seed=int(seed), weights=weights, q=q, foot=foot, score=score,
            cells=cells, uniq=uniq, start=start, order=order,
        )
    return dbs
