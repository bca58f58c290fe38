"""Trunk guide-path planning.

A trunk pose is admissible when the body and its ground-clearance wedge stay
out of collision while every limb's scaled reachability volume touches at
least one contact surface. A bidirectional RRT searches trunk positions under
that condition (yaw follows the direction of travel), the result is shortcut
smoothed, and a bounded-acceleration speed profile turns it into a
time-parameterized path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import GoalInvalid, NoPathFound, StartInvalid
from .mesh import TriMesh
from .robot import RobotModel, build_roms
from .terrain import terrain_height


@dataclass(frozen=True)
class RootState:
    position: np.ndarray
    yaw: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))


@dataclass(frozen=True)
class GuideParams:
    v_max: float = 0.25
    a_max: float = 0.5
    rrt_max_iters: int = 2000
    goal_bias: float = 0.1
    delta_check: float = 0.05
    seed: int = 0
    eta: float = 0.3  # RRT extension step
    shortcut_attempts: int = 200
    omega_max: float = 0.5  # max trunk turn rate along the path (rad/m)
    blend_len: float = 0.3  # yaw smoothing window (m), softens rate steps
    yaw_headroom: float = 0.52  # trunk must clear obstacles at yaw +- this
    max_corner: float = 0.6  # split polyline corners sharper than this (rad)

    def __post_init__(self):
        if min(self.v_max, self.a_max, self.rrt_max_iters, self.delta_check,
               self.eta) <= 0:
            raise ValueError("guide parameters must be positive")
        if not 0.0 <= self.goal_bias < 1.0:
            raise ValueError("goal_bias must be in [0, 1)")


def _wrap(a: float) -> float:
    return float((a + np.pi) % (2.0 * np.pi) - np.pi)


def _heading(d: np.ndarray, fallback: float) -> float:
    if np.hypot(d[0], d[1]) < 1e-9:
        return fallback
    return float(np.arctan2(d[1], d[0]))


class ReachabilityChecker:
    """Precomputed geometry for fast trunk-pose admissibility tests.

    Poses are additionally required to keep the trunk collision-free at the
    pose yaw plus or minus `yaw_headroom`, so an accepted path always has
    room to smooth its heading through corners."""

    def __init__(self, robot: RobotModel, roms: dict, mesh: TriMesh, surfaces,
                 yaw_headroom: float = 0.52):
        self.robot = robot
        self.tris = mesh.tri_verts
        self.yaw_headroom = float(yaw_headroom)
        self.surfaces = list(surfaces)
        self.hulls = [roms[l.id].scaled_hull for l in robot.limbs]
        if self.surfaces:
            self.surf_normals = np.array([s.normal for s in self.surfaces])
            self.surf_offsets = np.array([s.plane_offset() for s in self.surfaces])
            self.surf_lo = np.array([s.polygon.min(axis=0) for s in self.surfaces])
            self.surf_hi = np.array([s.polygon.max(axis=0) for s in self.surfaces])
        else:
            self.surf_normals = np.zeros((0, 3))
            self.surf_offsets = np.zeros(0)
            self.surf_lo = np.zeros((0, 3))
            self.surf_hi = np.zeros((0, 3))

    def body_collides(self, position, yaw: float) -> bool:
        rot = geo.yaw_matrix(yaw)
        pos = np.asarray(position, dtype=float)
        for shape in (self.robot.trunk_shape, self.robot.clearance_shape):
            posed = shape.transformed(rot, pos)
            if geo.polytope_intersects_triangles(posed, self.tris):
                return True
        return False

    def _limb_reaches(self, hull_world: geo.ConvexPolytope) -> bool:
        if not self.surfaces:
            return False
        verts = hull_world.vertices
        # plane straddle prefilter: the hull must touch each candidate plane
        d = verts @ self.surf_normals.T - self.surf_offsets  # (V, S)
        straddle = (d.min(axis=0) <= 1e-9) & (d.max(axis=0) >= -1e-9)
        if not straddle.any():
            return False
        lo, hi = hull_world.aabb()
        near = straddle & np.all((self.surf_hi >= lo) & (self.surf_lo <= hi), axis=1)
        for si in np.nonzero(near)[0]:
            s = self.surfaces[si]
            if geo.polytope_intersects_polygon(hull_world, s.polygon, s.normal):
                return True
        return False

    def check(self, position, yaw: float, headroom: float | None = None) -> bool:
        if self.body_collides(position, yaw):
            return False
        h = self.yaw_headroom if headroom is None else headroom
        if h > 0.0 and (self.body_collides(position, yaw - h)
                        or self.body_collides(position, yaw + h)):
            return False
        rot = geo.yaw_matrix(yaw)
        pos = np.asarray(position, dtype=float)
        for hull in self.hulls:
            if not self._limb_reaches(hull.transformed(rot, pos)):
                return False
        return True

    def check_states(self, states, headroom: float | None = None) -> bool:
        return all(self.check(p, y, headroom) for p, y in states)


def reachability_check(state: RootState, mesh: TriMesh, surfaces,
                       robot: RobotModel, roms: dict | None = None) -> bool:
    """Single-pose admissibility test (builds throwaway precomputation).
    Checks the bare condition, without the planner's turning headroom."""
    if roms is None:
        roms = build_roms(robot)
    return ReachabilityChecker(robot, roms, mesh, surfaces,
                               yaw_headroom=0.0).check(
        state.position, state.yaw
    )


# ---------------------------------------------------------------------------
# Time-parameterized path
# ---------------------------------------------------------------------------


class RootPath:
    """Polyline trunk path with smoothed yaw and a trapezoidal speed profile.

    Yaw tracks the local heading of travel under a turn-rate limit of
    `omega` radians per meter of arc, applied forward from the start and
    backward from the goal so both endpoint yaws are met exactly. A short
    moving average of width `blend` then softens the rate steps. Keeping
    the rate bounded matters: contacts are world-fixed while the trunk
    turns, so fast yaw sweeps break several of them at once, and a trunk
    that does not turn with the path slides sideways over its feet.
    """

    def __init__(self, waypoints: np.ndarray, start_yaw: float, goal_yaw: float,
                 v_max: float, a_max: float, blend: float,
                 omega: float = 1.2, ground=None):
        self.waypoints = np.asarray(waypoints, dtype=float).reshape(-1, 3)
        self.start_yaw = float(start_yaw)
        self.goal_yaw = float(goal_yaw)
        self.v_max = float(v_max)
        self.a_max = float(a_max)
        self.blend = float(blend)
        self.omega = float(omega)
        self.ground = ground
        segs = np.diff(self.waypoints, axis=0)
        self.seg_len = np.linalg.norm(segs, axis=1)
        keep = self.seg_len > 1e-12
        if len(segs) and not keep.all():
            self.waypoints = np.vstack([self.waypoints[:1][:],
                                        self.waypoints[1:][keep]])
            segs = np.diff(self.waypoints, axis=0)
            self.seg_len = np.linalg.norm(segs, axis=1)
        self.seg_dir = segs / self.seg_len[:, None] if len(segs) else np.zeros((0, 3))
        self.cum = np.concatenate([[0.0], np.cumsum(self.seg_len)])
        self.headings = np.array([
            _heading(d, self.start_yaw if i == 0 else 0.0)
            for i, d in enumerate(segs)
        ]) if len(segs) else np.zeros(0)
        for i in range(len(self.headings)):
            if np.hypot(segs[i][0], segs[i][1]) < 1e-9:
                self.headings[i] = self.headings[i - 1] if i else self.start_yaw
        # speed profile over total arc length
        s_total = float(self.cum[-1])
        self.length = s_total
        self._build_yaw_table()
        self._build_z_table()
        if s_total > 1e-12:
            v_c = min(self.v_max, np.sqrt(self.a_max * s_total))
            self.v_cruise = v_c
            self.s_ramp = v_c * v_c / (2.0 * self.a_max)
            self.t_ramp = v_c / self.a_max
            self.duration = 2.0 * self.t_ramp + (s_total - 2.0 * self.s_ramp) / v_c
        else:
            self.v_cruise = 0.0
            self.s_ramp = 0.0
            self.t_ramp = 0.0
            self.duration = 0.0

    # -- yaw law ---------------------------------------------------------

    def _build_yaw_table(self):
        """Dense arc -> yaw samples: per-segment headings unwrapped, rate
        limited toward the start yaw going forward and toward the goal yaw
        going backward, then box filtered over the blend window and pinned
        to the exact endpoint yaws."""
        if self.length <= 1e-12 or len(self.headings) == 0:
            self._yaw_arcs = np.array([0.0, max(self.length, 1e-9)])
            self._yaw_tab = np.array([self.start_yaw, self.start_yaw])
            return
        m = max(int(np.ceil(self.length / 0.02)), 8)
        arcs = np.linspace(0.0, self.length, m + 1)
        ds = self.length / m
        seg = np.clip(np.searchsorted(self.cum, arcs, side="right") - 1,
                      0, len(self.seg_len) - 1)
        raw = np.unwrap(self.headings[seg])
        w0 = raw[0] + _wrap(self.start_yaw - raw[0])
        w1 = raw[-1] + _wrap(self.goal_yaw - raw[-1])
        lim = max(self.omega, 1e-6) * ds
        fwd = raw.copy()
        fwd[0] = w0
        for i in range(1, len(fwd)):
            fwd[i] = fwd[i - 1] + np.clip(raw[i] - fwd[i - 1], -lim, lim)
        tab = fwd.copy()
        tab[-1] = w1
        for i in range(len(tab) - 2, -1, -1):
            tab[i] = tab[i + 1] + np.clip(fwd[i] - tab[i + 1], -lim, lim)
        half = int(round(0.5 * self.blend / ds))
        if half >= 1:
            pad = np.concatenate([np.full(half, tab[0]), tab,
                                  np.full(half, tab[-1])])
            kernel = np.full(2 * half + 1, 1.0 / (2 * half + 1))
            tab = np.convolve(pad, kernel, mode="valid")
        # pin the exact endpoint yaws, tapering the correction locally
        win = min(max(self.blend, 0.3), self.length / 2.0)
        t0 = np.clip(1.0 - arcs / win, 0.0, 1.0)
        t1 = np.clip(1.0 - (self.length - arcs) / win, 0.0, 1.0)
        tab = tab + t0 * (w0 - tab[0]) + t1 * (w1 - tab[-1])
        self._yaw_arcs = arcs
        self._yaw_tab = tab

    def yaw_at_arc(self, s: float) -> float:
        return _wrap(float(np.interp(s, self._yaw_arcs, self._yaw_tab)))

    def _build_z_table(self):
        """Dense arc -> trunk height samples following the local ground at
        the start clearance (blended toward the goal clearance), slope
        limited both ways and pinned to the exact endpoint heights. Sampled
        RRT waypoints wander vertically by a few centimeters, which is
        enough to upset footholds; walking height should come from the
        terrain, not from sampling noise."""
        self._z_arcs = None
        self._z_tab = None
        if self.ground is None or self.length <= 1e-12:
            return
        m = max(int(np.ceil(self.length / 0.02)), 8)
        arcs = np.linspace(0.0, self.length, m + 1)
        ds = self.length / m
        g = np.full(m + 1, np.nan)
        for i, s in enumerate(arcs):
            seg, u = self._locate(s)
            p = self.waypoints[seg] + self.seg_dir[seg] * u
            try:
                g[i] = self.ground(float(p[0]), float(p[1]))
            except Exception:
                pass
        ok = ~np.isnan(g)
        if not ok.any():
            return
        g = np.interp(arcs, arcs[ok], g[ok])
        z0 = float(self.waypoints[0][2])
        z1 = float(self.waypoints[-1][2])
        raw = g + (z0 - g[0]) + ((z1 - g[-1]) - (z0 - g[0])) * (arcs / self.length)
        lim = 0.35 * ds
        fwd = raw.copy()
        fwd[0] = z0
        for i in range(1, len(fwd)):
            fwd[i] = fwd[i - 1] + np.clip(raw[i] - fwd[i - 1], -lim, lim)
        tab = fwd.copy()
        tab[-1] = z1
        for i in range(len(tab) - 2, -1, -1):
            tab[i] = tab[i + 1] + np.clip(fwd[i] - tab[i + 1], -lim, lim)
        half = int(round(0.5 * 0.3 / ds))
        if half >= 1:
            pad = np.concatenate([np.full(half, tab[0]), tab,
                                  np.full(half, tab[-1])])
            kernel = np.full(2 * half + 1, 1.0 / (2 * half + 1))
            tab = np.convolve(pad, kernel, mode="valid")
        win = min(0.3, self.length / 2.0)
        t0 = np.clip(1.0 - arcs / win, 0.0, 1.0)
        t1 = np.clip(1.0 - (self.length - arcs) / win, 0.0, 1.0)
        tab = tab + t0 * (z0 - tab[0]) + t1 * (z1 - tab[-1])
        self._z_arcs = arcs
        self._z_tab = tab

    def z_at_arc(self, s: float):
        if self._z_arcs is None:
            return None
        return float(np.interp(s, self._z_arcs, self._z_tab))

    def _locate(self, s: float):
        s = float(np.clip(s, 0.0, self.length))
        seg = int(np.searchsorted(self.cum, s, side="right") - 1)
        seg = min(max(seg, 0), max(len(self.seg_len) - 1, 0))
        return seg, s - self.cum[seg]

    def speed_at_arc(self, s: float) -> float:
        if self.length <= 1e-12:
            return 0.0
        s = float(np.clip(s, 0.0, self.length))
        v2 = min(
            self.v_cruise**2,
            2.0 * self.a_max * s,
            2.0 * self.a_max * (self.length - s),
        )
        return float(np.sqrt(max(v2, 0.0)))

    def time_at_arc(self, s: float) -> float:
        if self.length <= 1e-12:
            return 0.0
        s = float(np.clip(s, 0.0, self.length))
        if s <= self.s_ramp:
            return float(np.sqrt(2.0 * s / self.a_max))
        if s >= self.length - self.s_ramp:
            return self.duration - float(np.sqrt(2.0 * (self.length - s) / self.a_max))
        return self.t_ramp + (s - self.s_ramp) / self.v_cruise

    def arc_at_time(self, t: float) -> float:
        if self.length <= 1e-12:
            return 0.0
        t = float(np.clip(t, 0.0, self.duration))
        if t <= self.t_ramp:
            return 0.5 * self.a_max * t * t
        if t >= self.duration - self.t_ramp:
            dt = self.duration - t
            return self.length - 0.5 * self.a_max * dt * dt
        return self.s_ramp + self.v_cruise * (t - self.t_ramp)

    def state_at_arc(self, s: float) -> RootState:
        if len(self.seg_len) == 0:
            return RootState(self.waypoints[0].copy(), self.start_yaw,
                             np.zeros(3), 0.0)
        seg, u = self._locate(s)
        pos = self.waypoints[seg] + self.seg_dir[seg] * u
        z = self.z_at_arc(s)
        if z is not None:
            pos[2] = z
        yaw = self.yaw_at_arc(s)
        speed = self.speed_at_arc(s)
        return RootState(pos, yaw, self.seg_dir[seg] * speed, self.time_at_arc(s))

    def state_at_time(self, t: float) -> RootState:
        return self.state_at_arc(self.arc_at_time(t))

    @property
    def states(self):
        return [self.state_at_arc(s) for s in self.cum]

    def discretize(self, delta: float):
        """Equidistant-by-arc samples, both endpoints included."""
        if delta <= 0:
            raise ValueError("delta must be positive")
        if self.length <= 1e-12:
            s_vals = [0.0, 0.0]
        else:
            n = int(np.floor(self.length / delta + 1e-9))
            s_vals = [i * delta for i in range(n + 1)]
            if self.length - s_vals[-1] > 1e-9:
                s_vals.append(self.length)
            if len(s_vals) == 1:
                s_vals.append(self.length)
        return [self.state_at_arc(s) for s in s_vals], s_vals

    def to_rows(self, delta: float = 0.05) -> str:
        states, _ = self.discretize(delta)
        lines = ["# t x y z yaw vx vy vz"]
        for st in states:
            p, v = st.position, st.velocity
            lines.append(
                f"{st.time!r} {p[0]!r} {p[1]!r} {p[2]!r} {st.yaw!r} "
                f"{v[0]!r} {v[1]!r} {v[2]!r}"
            )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Bi-RRT
# ---------------------------------------------------------------------------


class _Tree:
    def __init__(self, root_pos, root_yaw, capacity=256):
        self.pos = np.zeros((capacity, 3))
        self.pos[0] = root_pos
        self.yaw = [float(root_yaw)]
        self.parent = [-1]
        self.n = 1

    def add(self, pos, yaw, parent):
        if self.n == len(self.pos):
            self.pos = np.vstack([self.pos, np.zeros_like(self.pos)])
        self.pos[self.n] = pos
        self.yaw.append(float(yaw))
        self.parent.append(parent)
        self.n += 1
        return self.n - 1

    def nearest(self, target) -> int:
        d = self.pos[: self.n] - target
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def chain(self, i) -> list:
        out = []
        while i >= 0:
            out.append(self.pos[i].copy())
            i = self.parent[i]
        return out


def _segment_poses(p0, p1, yaw, delta):
    d = np.asarray(p1, dtype=float) - np.asarray(p0, dtype=float)
    length = float(np.linalg.norm(d))
    if length < 1e-12:
        return [(np.asarray(p0, dtype=float), yaw)]
    n = max(int(np.ceil(length / delta)), 1)
    ts = np.linspace(0.0, 1.0, n + 1)
    return [(p0 + t * d, yaw) for t in ts]


def _segment_valid(checker, p0, p1, yaw, delta) -> bool:
    return checker.check_states(_segment_poses(p0, p1, yaw, delta))


def _extend(tree: _Tree, target, checker, params, reverse):
    i = tree.nearest(target)
    p0 = tree.pos[i]
    d = target - p0
    dist = float(np.linalg.norm(d))
    if dist < 1e-12:
        return None, False
    p1 = target if dist <= params.eta else p0 + d * (params.eta / dist)
    yaw = _heading(p0 - p1 if reverse else p1 - p0, tree.yaw[i])
    if not _segment_valid(checker, p0, p1, yaw, params.delta_check):
        return None, False
    j = tree.add(p1, yaw, i)
    return j, bool(dist <= params.eta)


def _connect(tree: _Tree, target, checker, params, reverse):
    """Repeatedly extend toward target; returns node index on arrival."""
    guard = 0
    while True:
        guard += 1
        if guard > 10000:
            return None
        j, arrived = _extend(tree, target, checker, params, reverse)
        if j is None:
            return None
        if arrived:
            return j


def _assemble(waypoints, start, goal, params, checker, ground=None) -> RootPath:
    path = None
    for omega in (params.omega_max, 1.5 * params.omega_max,
                  2.25 * params.omega_max):
        blend = params.blend_len
        while True:
            path = RootPath(np.array(waypoints), start.yaw, goal.yaw,
                            params.v_max, params.a_max, blend, omega,
                            ground=ground)
            n_states = max(int(np.ceil(path.length / params.delta_check)), 1)
            poses = [
                (st.position, st.yaw)
                for st in (path.state_at_arc(s)
                           for s in np.linspace(0.0, path.length, n_states + 1))
            ]
            # the final path needs only the bare condition; turning headroom
            # is an exploration margin, already paid for growing the tree
            if checker.check_states(poses, headroom=0.0):
                return path
            if blend <= 0.0:
                break
            blend = 0.0 if blend < 0.02 else blend / 2.0
    return path


def _shortcut(waypoints, checker, params, rng):
    wps = [np.asarray(w, dtype=float) for w in waypoints]
    for _ in range(params.shortcut_attempts):
        if len(wps) < 3:
            break
        i = int(rng.integers(0, len(wps) - 2))
        j = int(rng.integers(i + 2, len(wps)))
        yaw = _heading(wps[j] - wps[i], 0.0)
        if _segment_valid(checker, wps[i], wps[j], yaw, params.delta_check):
            del wps[i + 1:j]
    # deterministic pull to a fixpoint: sampling noise that survives the
    # random pass still shows up as heading wiggle in the contact gait
    changed = True
    while changed and len(wps) > 2:
        changed = False
        i = 1
        while i < len(wps) - 1:
            yaw = _heading(wps[i + 1] - wps[i - 1], 0.0)
            if _segment_valid(checker, wps[i - 1], wps[i + 1], yaw,
                              params.delta_check):
                del wps[i]
                changed = True
            else:
                i += 1
    return wps


def _align_ends(wps, start_yaw, goal_yaw, checker, params):
    """Insert a short straight stub along the start (goal) yaw when the first
    (last) segment points far away from it. The walk then rolls off aligned
    and the big turn becomes an interior corner that rounding can split,
    instead of the trunk strafing over its feet from the first step."""
    wps = [np.asarray(w, dtype=float) for w in wps]
    if len(wps) >= 2:
        d0 = wps[1] - wps[0]
        l0 = float(np.linalg.norm(d0))
        if l0 > 0.25 and abs(_wrap(_heading(d0, start_yaw) - start_yaw)) \
                > params.max_corner:
            p = wps[0] + min(0.35, l0 / 3.0) * np.array(
                [np.cos(start_yaw), np.sin(start_yaw), 0.0]
            )
            if (_segment_valid(checker, wps[0], p, start_yaw,
                               params.delta_check)
                    and _segment_valid(checker, p, wps[1],
                                       _heading(wps[1] - p, start_yaw),
                                       params.delta_check)):
                wps.insert(1, p)
    if len(wps) >= 2:
        d1 = wps[-1] - wps[-2]
        l1 = float(np.linalg.norm(d1))
        if l1 > 0.25 and abs(_wrap(_heading(d1, goal_yaw) - goal_yaw)) \
                > params.max_corner:
            p = wps[-1] - min(0.35, l1 / 3.0) * np.array(
                [np.cos(goal_yaw), np.sin(goal_yaw), 0.0]
            )
            if (_segment_valid(checker, p, wps[-1], goal_yaw,
                               params.delta_check)
                    and _segment_valid(checker, wps[-2], p,
                                       _heading(p - wps[-2], goal_yaw),
                                       params.delta_check)):
                wps.insert(len(wps) - 1, p)
    return wps


def _round_corners(wps, checker, params):
    """Split polyline corners sharper than max_corner into pairs of shallower
    ones so the yaw profile can be smoothed at a bounded turn rate. Each split
    replaces the corner vertex with two points a third of the way along its
    segments; splits that fail validation are kept as they were."""
    wps = [np.asarray(w, dtype=float) for w in wps]
    for _ in range(6):
        if len(wps) >= 64:
            break
        split_any = False
        i = 1
        while i < len(wps) - 1 and len(wps) < 64:
            d0 = wps[i] - wps[i - 1]
            d1 = wps[i + 1] - wps[i]
            h0 = _heading(d0, 0.0)
            h1 = _heading(d1, h0)
            if abs(_wrap(h1 - h0)) <= params.max_corner:
                i += 1
                continue
            a = wps[i] - d0 / 3.0
            b = wps[i] + d1 / 3.0
            mid_yaw = _heading(b - a, h0)
            if (_segment_valid(checker, a, b, mid_yaw, params.delta_check)
                    and _segment_valid(checker, wps[i - 1], a, h0,
                                       params.delta_check)
                    and _segment_valid(checker, b, wps[i + 1], h1,
                                       params.delta_check)):
                wps[i:i + 1] = [a, b]
                split_any = True
                i += 2
            else:
                i += 1
        if not split_any:
            break
    return wps


def plan_root_path(mesh: TriMesh, surfaces, start: RootState, goal: RootState,
                   robot: RobotModel, params: GuideParams,
                   roms: dict | None = None, bounds=None,
                   checker: ReachabilityChecker | None = None) -> RootPath:
    """Bidirectional RRT over trunk positions validated by the reachability
    condition, followed by shortcut smoothing and time parameterization.

    Raises StartInvalid / GoalInvalid when an endpoint fails the condition
    and NoPathFound when the iteration budget runs out.
    """
    if checker is None:
        if roms is None:
            roms = build_roms(robot)
        checker = ReachabilityChecker(robot, roms, mesh, surfaces,
                                      yaw_headroom=params.yaw_headroom)
    if not checker.check(start.position, start.yaw):
        raise StartInvalid("start state fails the reachability condition")
    if not checker.check(goal.position, goal.yaw):
        raise GoalInvalid("goal state fails the reachability condition")

    if bounds is None:
        lo = np.minimum(mesh.vertices.min(axis=0),
                        np.minimum(start.position, goal.position)) - 0.3
        hi = np.maximum(mesh.vertices.max(axis=0),
                        np.maximum(start.position, goal.position)) + 0.3
        lo[2] = min(start.position[2], goal.position[2]) - 0.25
        hi[2] = max(start.position[2], goal.position[2]) + 0.35
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)

    rng = np.random.default_rng(params.seed)

    def ground(x, y):
        return terrain_height(mesh, x, y)

    if float(np.linalg.norm(goal.position - start.position)) < 1e-12:
        return _assemble([start.position], start, goal, params, checker,
                         ground=ground)

    # direct connection dodges tree growth entirely on easy queries
    direct_yaw = _heading(goal.position - start.position, start.yaw)
    if _segment_valid(checker, start.position, goal.position, direct_yaw,
                      params.delta_check):
        waypoints = _align_ends([start.position, goal.position],
                                start.yaw, goal.yaw, checker, params)
        waypoints = _round_corners(waypoints, checker, params)
        return _assemble(waypoints, start, goal, params, checker,
                         ground=ground)

    tree_a = _Tree(start.position, start.yaw)
    tree_b = _Tree(goal.position, goal.yaw)
    for it in range(params.rrt_max_iters):
        grow_a = it % 2 == 0
        tree, other = (tree_a, tree_b) if grow_a else (tree_b, tree_a)
        if rng.random() < params.goal_bias:
            sample = other.pos[0].copy()
        else:
            sample = rng.uniform(lo, hi)
        j, _ = _extend(tree, sample, checker, params, reverse=not grow_a)
        if j is None:
            continue
        k = _connect(other, tree.pos[j].copy(), checker, params, reverse=grow_a)
        if k is None:
            continue
        if grow_a:
            chain_a, chain_b = tree_a.chain(j), tree_b.chain(k)
        else:
            chain_a, chain_b = tree_a.chain(k), tree_b.chain(j)
        waypoints = chain_a[::-1] + chain_b[1:]
        waypoints = _shortcut(waypoints, checker, params, rng)
        waypoints = _align_ends(waypoints, start.yaw, goal.yaw, checker,
                                params)
        waypoints = _round_corners(waypoints, checker, params)
        return _assemble(waypoints, start, goal, params, checker,
                         ground=ground)
    raise NoPathFound(f"no guide path within {params.rrt_max_iters} iterations")
