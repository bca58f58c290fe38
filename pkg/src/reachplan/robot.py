"""Parametric quadruped model.

Each limb is a 3-DoF serial chain: abduction about +x at the hip, then hip
and knee pitch about +y. In the trunk frame,

    foot = hip + Rx(q1) @ (Ry(q2) @ (0, 0, -L1) + Ry(q2 + q3) @ (0, 0, -L2))

so q = (0, 0, 0) is the fully extended leg pointing straight down. Kinematics
are closed-form throughout (FK, IK, Jacobian).
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import DegenerateHull, OutOfReach, ScenarioError
from .mesh import TriMesh

LIMB_ORDER = ("LF", "RF", "LH", "RH")
SELF_COLLISION_INFLATE = 0.02

KNEE_IN = -1  # q3 < 0
KNEE_OUT = +1


@dataclass(frozen=True)
class LimbModel:
    id: str
    hip_offset: np.ndarray
    link_lengths: tuple
    joint_limits: np.ndarray  # (3, 2) radians
    q_standing: np.ndarray
    branch: int = KNEE_IN

    def __post_init__(self):
        object.__setattr__(self, "hip_offset", np.asarray(self.hip_offset, dtype=float))
        object.__setattr__(self, "joint_limits", np.asarray(self.joint_limits, dtype=float))
        object.__setattr__(self, "q_standing", np.asarray(self.q_standing, dtype=float))
        l1, l2 = self.link_lengths
        if l1 <= 0 or l2 <= 0:
            raise ValueError("link lengths must be positive")
        if np.any(self.joint_limits[:, 0] >= self.joint_limits[:, 1]):
            raise ValueError("joint limits must satisfy min < max")
        if not self.within_limits(self.q_standing):
            raise ValueError(f"{self.id}: q_standing outside joint limits")

    def within_limits(self, q, tol: float = 1e-9) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(
            np.all(q >= self.joint_limits[:, 0] - tol)
            and np.all(q <= self.joint_limits[:, 1] + tol)
        )


@dataclass(frozen=True)
class RobotModel:
    trunk_shape: geo.ConvexPolytope
    clearance_shape: geo.ConvexPolytope
    limbs: tuple
    mass: float
    com_offset: np.ndarray
    mu_default: float
    tau_max: float
    standing_height: float

    def __post_init__(self):
        object.__setattr__(self, "com_offset", np.asarray(self.com_offset, dtype=float))
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if not 0.0 < self.mu_default <= 2.0:
            raise ValueError("mu_default must be in (0, 2]")
        if self.tau_max <= 0:
            raise ValueError("tau_max must be positive")
        ids = tuple(l.id for l in self.limbs)
        if ids != LIMB_ORDER:
            raise ValueError(f"limbs must be ordered {LIMB_ORDER}, got {ids}")

    def limb(self, limb_id: str) -> LimbModel:
        return self.limbs[LIMB_ORDER.index(limb_id)]

    def com_world(self, position, yaw: float) -> np.ndarray:
        return np.asarray(position, dtype=float) + geo.yaw_matrix(yaw) @ self.com_offset

    def hash(self) -> str:
        """Stable digest of every kinematic/physical parameter."""
        parts = [
            repr(np.asarray(self.trunk_shape.vertices).round(12).tolist()),
            repr(np.asarray(self.clearance_shape.vertices).round(12).tolist()),
            repr(self.mass), repr(self.mu_default), repr(self.tau_max),
            repr(self.standing_height), repr(self.com_offset.tolist()),
        ]
        for l in self.limbs:
            parts.append("|".join([
                l.id,
                repr(l.hip_offset.tolist()),
                repr(list(l.link_lengths)),
                repr(l.joint_limits.tolist()),
                repr(l.q_standing.tolist()),
                repr(l.branch),
            ]))
        return hashlib.sha256("\n".join(parts).encode()).hexdigest()


@dataclass(frozen=True)
class ReachabilityVolume:
    limb_id: str
    hull: geo.ConvexPolytope  # unscaled, trunk frame
    scaled_hull: geo.ConvexPolytope
    scale: float

    def volume_ratio(self) -> float:
        return self.scaled_hull.volume / self.hull.volume


# ---------------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------------


def limb_fk(limb: LimbModel, q) -> np.ndarray:
    """Foot position in the trunk frame."""
    q1, q2, q3 = q
    l1, l2 = limb.link_lengths
    u = -l1 * np.sin(q2) - l2 * np.sin(q2 + q3)
    w = -l1 * np.cos(q2) - l2 * np.cos(q2 + q3)
    return limb.hip_offset + np.array([u, -np.sin(q1) * w, np.cos(q1) * w])


def limb_fk_batch(limb: LimbModel, Q: np.ndarray):
    """Vectorized FK. Returns (feet, knees), each (n, 3), trunk frame."""
    Q = np.asarray(Q, dtype=float)
    l1, l2 = limb.link_lengths
    s1, c1 = np.sin(Q[:, 0]), np.cos(Q[:, 0])
    s2, c2 = np.sin(Q[:, 1]), np.cos(Q[:, 1])
    s23, c23 = np.sin(Q[:, 1] + Q[:, 2]), np.cos(Q[:, 1] + Q[:, 2])
    ku = -l1 * s2
    kw = -l1 * c2
    fu = ku - l2 * s23
    fw = kw - l2 * c23
    knees = limb.hip_offset + np.column_stack([ku, -s1 * kw, c1 * kw])
    feet = limb.hip_offset + np.column_stack([fu, -s1 * fw, c1 * fw])
    return feet, knees


def knee_position(limb: LimbModel, q) -> np.ndarray:
    q1, q2, _ = q
    l1 = limb.link_lengths[0]
    ku, kw = -l1 * np.sin(q2), -l1 * np.cos(q2)
    return limb.hip_offset + np.array([ku, -np.sin(q1) * kw, np.cos(q1) * kw])


def _wrap(a: float) -> float:
    return float((a + np.pi) % (2.0 * np.pi) - np.pi)


def limb_ik(limb: LimbModel, p, branch: int | None = None) -> np.ndarray:
    """Analytic IK for a trunk-frame foot target.

    Raises OutOfReach when the target is outside the radial workspace or the
    solution violates joint limits. The branch picks the knee sign (q3 < 0 for
    KNEE_IN, q3 > 0 for KNEE_OUT).
    """
    if branch is None:
        branch = limb.branch
    l1, l2 = limb.link_lengths
    d = np.asarray(p, dtype=float) - limb.hip_offset
    q1 = float(np.arctan2(d[1], -d[2]))
    x = d[0]
    r = float(np.hypot(d[1], d[2]))
    rho2 = x * x + r * r
    cos_q3 = (rho2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if cos_q3 > 1.0 + 1e-12 or cos_q3 < -1.0 - 1e-12:
        raise OutOfReach(f"{limb.id}: target at distance {np.sqrt(rho2):.3f} m unreachable")
    q3 = branch * float(np.arccos(np.clip(cos_q3, -1.0, 1.0)))
    q2 = _wrap(
        float(np.arctan2(-x, r))
        - float(np.arctan2(l2 * np.sin(q3), l1 + l2 * np.cos(q3)))
    )
    q = np.array([q1, q2, q3])
    if not limb.within_limits(q):
        raise OutOfReach(f"{limb.id}: IK solution violates joint limits")
    return q


def limb_ik_feasible(limb: LimbModel, p, branch: int | None = None):
    """IK that returns None instead of raising; hot-path variant."""
    try:
        return limb_ik(limb, p, branch)
    except OutOfReach:
        return None


def limb_jacobian(limb: LimbModel, q) -> np.ndarray:
    """d(foot)/d(q), trunk frame, from the axis/moment-arm construction."""
    foot = limb_fk(limb, q)
    knee = knee_position(limb, q)
    hip = limb.hip_offset
    axis1 = np.array([1.0, 0.0, 0.0])
    axis23 = np.array([0.0, np.cos(q[0]), np.sin(q[0])])  # +y rotated by Rx(q1)
    return np.column_stack([
        np.cross(axis1, foot - hip),
        np.cross(axis23, foot - hip),
        np.cross(axis23, foot - knee),
    ])


def static_torques(limb: LimbModel, q, f) -> np.ndarray:
    """Joint torques balancing a trunk-frame contact force f at the foot."""
    return limb_jacobian(limb, q).T @ np.asarray(f, dtype=float)


# ---------------------------------------------------------------------------
# Reachability volumes and collision
# ---------------------------------------------------------------------------


def self_collision_mask(trunk_shape: geo.ConvexPolytope, feet: np.ndarray,
                        knees: np.ndarray) -> np.ndarray:
    """True where foot or knee penetrates the inflated trunk box."""
    lo, hi = trunk_shape.aabb()
    lo = lo - SELF_COLLISION_INFLATE
    hi = hi + SELF_COLLISION_INFLATE
    inside_f = np.all((feet >= lo) & (feet <= hi), axis=1)
    inside_k = np.all((knees >= lo) & (knees <= hi), axis=1)
    return inside_f | inside_k


def generate_rom(limb: LimbModel, n_samples: int = 2000, scale: float = 0.85,
                 seed: int = 0, trunk_shape: geo.ConvexPolytope | None = None) -> ReachabilityVolume:
    """Reachable-foot-position hull from uniform joint-space sampling.

    Self-colliding samples (foot or knee inside the inflated trunk) are
    rejected before the hull is built; the hull is then scaled about its
    volumetric centroid.
    """
    if n_samples < 4:
        raise ValueError("n_samples must be at least 4")
    if not 0.0 < scale <= 1.0:
        raise ValueError("scale must be in (0, 1]")
    rng = np.random.default_rng(seed)
    lim = limb.joint_limits
    Q = rng.uniform(lim[:, 0], lim[:, 1], size=(n_samples, 3))
    feet, knees = limb_fk_batch(limb, Q)
    if trunk_shape is not None:
        keep = ~self_collision_mask(trunk_shape, feet, knees)
        feet = feet[keep]
    if len(feet) < 4:
        raise DegenerateHull(f"{limb.id}: only {len(feet)} usable samples")
    try:
        hull = geo.ConvexPolytope.from_points(feet)
    except geo.QhullError as exc:
        raise DegenerateHull(f"{limb.id}: {exc}") from exc
    scaled = hull.scaled_about(hull.centroid, scale)
    return ReachabilityVolume(limb.id, hull, scaled, scale)


def build_roms(robot: RobotModel, n_samples: int = 2000, scale: float = 0.85,
               seed: int = 11) -> dict:
    """Per-limb reachability volumes with a shared base seed."""
    return {
        l.id: generate_rom(l, n_samples, scale, seed + i, robot.trunk_shape)
        for i, l in enumerate(robot.limbs)
    }


def collides(shape: geo.ConvexPolytope, position, yaw: float, env: TriMesh | np.ndarray) -> bool:
    """Closed-set collision of a posed convex shape against terrain triangles."""
    tris = env.tri_verts if isinstance(env, TriMesh) else env
    posed = shape.transformed(geo.yaw_matrix(yaw), np.asarray(position, dtype=float))
    return geo.polytope_intersects_triangles(posed, tris)


# ---------------------------------------------------------------------------
# Default model and description files
# ---------------------------------------------------------------------------

_DEFAULT_TRUNK_SIZE = (0.55, 0.44, 0.16)
_DEFAULT_HIPS = {
    "LF": (0.275, 0.30, 0.0),
    "RF": (0.275, -0.30, 0.0),
    "LH": (-0.275, 0.30, 0.0),
    "RH": (-0.275, -0.30, 0.0),
}
_DEFAULT_LINKS = (0.165, 0.22)
_DEFAULT_LIMITS = ((-0.610865, 0.610865), (-0.17, 1.57), (-2.30, -0.35))
# trunk center sits slightly ahead of the mass center (rear-heavy body); the
# rearward shift widens the thin front-diagonal support margin while walking
_DEFAULT_COM_OFFSET = (-0.02, 0.0, 0.0)


def _clearance_prism(trunk_size, apex_drop: float, apex_width: float) -> geo.ConvexPolytope:
    """Wedge under the trunk: full trunk footprint at the belly, narrowing to
    a thin edge `apex_drop` below the trunk centre. Forces the trunk to keep
    ground clearance while allowing low steps near the feet."""
    hx = trunk_size[0] / 2.0
    hy = trunk_size[1] / 2.0
    z_top = -trunk_size[2] / 2.0
    wy = apex_width / 2.0
    pts = [
        [sx * hx, sy * hy, z_top] for sx in (-1, 1) for sy in (-1, 1)
    ] + [
        [sx * hx, sy * wy, -apex_drop] for sx in (-1, 1) for sy in (-1, 1)
    ]
    return geo.ConvexPolytope.from_points(np.array(pts))


def _standing_q(links, standing_height: float, branch: int) -> np.ndarray:
    probe = LimbModel(
        id="LF", hip_offset=(0, 0, 0), link_lengths=links,
        joint_limits=np.array([(-np.pi, np.pi), (-np.pi, np.pi), (-np.pi, np.pi)]) * 0.999,
        q_standing=(0.0, 0.0, 0.0), branch=branch,
    )
    return limb_ik(probe, (0.0, 0.0, -standing_height), branch)


def default_robot(mass: float = 30.0, mu: float = 0.5, tau_max: float = 40.0,
                  standing_height: float = 0.32) -> RobotModel:
    trunk = geo.make_box(_DEFAULT_TRUNK_SIZE)
    clearance = _clearance_prism(_DEFAULT_TRUNK_SIZE, standing_height - 0.12, 0.04)
    q_std = _standing_q(_DEFAULT_LINKS, standing_height, KNEE_IN)
    limbs = tuple(
        LimbModel(
            id=lid,
            hip_offset=_DEFAULT_HIPS[lid],
            link_lengths=_DEFAULT_LINKS,
            joint_limits=np.array(_DEFAULT_LIMITS),
            q_standing=q_std,
            branch=KNEE_IN,
        )
        for lid in LIMB_ORDER
    )
    return RobotModel(
        trunk_shape=trunk,
        clearance_shape=clearance,
        limbs=limbs,
        mass=mass,
        com_offset=np.array(_DEFAULT_COM_OFFSET),
        mu_default=mu,
        tau_max=tau_max,
        standing_height=standing_height,
    )


_ROBOT_KEYS = {
    "robot": {"mass", "mu", "tau_max", "standing_height", "com_offset"},
    "trunk": {"size", "clearance_drop", "clearance_apex_width"},
}
_LIMB_KEYS = {"hip", "links", "q1_range", "q2_range", "q3_range", "q_standing", "branch"}


def _floats(text: str, n: int, what: str) -> list:
    parts = text.split()
    if len(parts) != n:
        raise ScenarioError(f"{what}: expected {n} numbers, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ScenarioError(f"{what}: bad number in {text!r}") from exc


def load_robot(path) -> RobotModel:
    """Read a robot description file (INI). Unknown sections/keys are errors."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = cp.read(str(path))
    if not read:
        raise FileNotFoundError(path)
    for section in cp.sections():
        if section in _ROBOT_KEYS:
            allowed = _ROBOT_KEYS[section]
        elif section.startswith("limb.") and section[5:] in LIMB_ORDER:
            allowed = _LIMB_KEYS
        else:
            raise ScenarioError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in allowed:
                raise ScenarioError(f"unknown key {key!r} in [{section}]")
    try:
        g = cp["robot"]
        mass = g.getfloat("mass", 30.0)
        mu = g.getfloat("mu", 0.5)
        tau_max = g.getfloat("tau_max", 40.0)
        height = g.getfloat("standing_height", 0.32)
        com_offset = np.array(_floats(g.get("com_offset", "-0.02 0 0"), 3, "com_offset"))
    except KeyError:
        mass, mu, tau_max, height = 30.0, 0.5, 40.0, 0.32
        com_offset = np.array(_DEFAULT_COM_OFFSET)
    t = cp["trunk"] if cp.has_section("trunk") else {}
    size = tuple(_floats(t.get("size", "0.55 0.44 0.16"), 3, "trunk size"))
    drop = float(t.get("clearance_drop", height - 0.12))
    apex_w = float(t.get("clearance_apex_width", 0.04))

    limbs = []
    for lid in LIMB_ORDER:
        sec = f"limb.{lid}"
        if not cp.has_section(sec):
            raise ScenarioError(f"missing section [{sec}]")
        s = cp[sec]
        hip = _floats(s.get("hip"), 3, f"{sec} hip")
        links = tuple(_floats(s.get("links"), 2, f"{sec} links"))
        limits = np.array([
            _floats(s.get("q1_range"), 2, f"{sec} q1_range"),
            _floats(s.get("q2_range"), 2, f"{sec} q2_range"),
            _floats(s.get("q3_range"), 2, f"{sec} q3_range"),
        ])
        branch_txt = s.get("branch", "knee_in").strip()
        if branch_txt not in ("knee_in", "knee_out"):
            raise ScenarioError(f"{sec}: branch must be knee_in or knee_out")
        branch = KNEE_IN if branch_txt == "knee_in" else KNEE_OUT
        q_std_txt = s.get("q_standing", "auto").strip()
        if q_std_txt == "auto":
            q_std = _standing_q(links, height, branch)
        else:
            q_std = np.array(_floats(q_std_txt, 3, f"{sec} q_standing"))
        limbs.append(LimbModel(lid, hip, links, limits, q_std, branch))

    return RobotModel(
        trunk_shape=geo.make_box(size),
        clearance_shape=_clearance_prism(size, drop, apex_w),
        limbs=tuple(limbs),
        mass=mass,
        com_offset=com_offset,
        mu_default=mu,
        tau_max=tau_max,
        standing_height=height,
    )
