"""Quasi-static validation of a finished contact plan.

Every recorded stance is re-checked for static stability, and every step
(consecutive stance pair) is swept with interpolated root poses. The walk is
quasi-static: the stepping foot may stay grounded for a prefix of the root
motion, swings across a middle window, and may touch down before the arrival
pose. A step passes when some lift/touchdown schedule keeps the support
margin above the floor across the whole sweep while every loaded contact
stays reachable. A step can fail for one of four causes,
reported in a fixed precedence order:

1. ``support-margin`` - the horizontal projection of the center of mass
   leaves the shared support polygon (or comes closer to its boundary than
   the margin floor), or no admissible contact-force distribution exists.
2. ``ik-failure`` - a support leg cannot keep its contact at an
   interpolated root pose.
3. ``torque-limit`` - holding the contact forces exceeds the joint torque
   limit.
4. ``swing-collision`` - the swing-foot trajectory intersects the terrain
   away from its own lift-off and touch-down points.

The checks are all evaluated so the report carries the full metrics, but a
failing step names only the highest-precedence cause.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .contacts import FOOT_HIT_EXCLUSION, ContactPlan, Stance, contact_diff
from .equilibrium import shared_contacts, static_equilibrium, support_margin
from .errors import DegenerateInput, DegenerateSupport
from .mesh import TriMesh
from .robot import (
    LIMB_ORDER,
    RobotModel,
    limb_ik_feasible,
    static_torques,
)

CAUSE_ORDER = ("structure", "support-margin", "ik-failure", "torque-limit",
               "swing-collision")


@dataclass(frozen=True)
class ValidatorParams:
    margin_min: float = 0.03  # support-polygon clearance floor (m)
    n_points: int = 11  # interpolated poses per step
    swing_height: float = 0.05  # apex of the swing arc above the chord (m)

    def __post_init__(self):
        if self.margin_min < 0 or self.n_points < 2 or self.swing_height < 0:
            raise ValueError("invalid validator parameters")


@dataclass(frozen=True)
class StepCheck:
    index: int
    limb_id: str
    ok: bool
    cause: str | None
    min_margin: float
    max_torque_ratio: float
    swing_clearance: float


@dataclass
class PlanReport:
    valid: bool
    stance_margins: list
    steps: list = field(default_factory=list)
    failure_cause: str = "none"

    @property
    def success(self) -> bool:
        return self.valid

    def failure_counts(self) -> dict:
        counts = {}
        for s in self.steps:
            if not s.ok:
                counts[s.cause] = counts.get(s.cause, 0) + 1
        return counts


def interpolate_swing(p0, p1, height: float, n: int) -> np.ndarray:
    """Swing-foot trajectory: straight chord plus a vertical parabolic bump
    that peaks at `height` mid-swing."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = (1.0 - t) * p0 + t * p1
    pts[:, 2] += 4.0 * height * (t[:, 0] * (1.0 - t[:, 0]))
    return pts


def _wrap_angle(a: float) -> float:
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def _swing_check(p0, p1, env_tris, params: ValidatorParams) -> tuple:
    """Returns (collides, clearance). Clearance is the closest approach of
    the interior of the swing arc to the terrain."""
    pts = interpolate_swing(p0, p1, params.swing_height, max(params.n_points, 5))
    seg_idx, hits = geo.segments_hit_triangles(pts[:-1], pts[1:], env_tris)
    collides = False
    for p in hits:
        if (np.linalg.norm(p - pts[0]) > FOOT_HIT_EXCLUSION
                and np.linalg.norm(p - pts[-1]) > FOOT_HIT_EXCLUSION):
            collides = True
            break
    interior = pts[1:-1]
    if len(interior):
        clearance = float(geo.point_triangle_distances(interior, env_tris).min())
    else:
        clearance = np.inf
    return collides, clearance


def _pose_metrics(robot: RobotModel, contacts, pos, yaw, hold_ik: bool):
    """Margin, torque ratio, and IK health for one support set at one root
    pose. Returns (margin, torque_ratio, support_ik_ok, held_ik_ok); margin
    is -inf when no admissible force distribution exists."""
    com = robot.com_world(pos, yaw)
    try:
        margin = support_margin(contacts, com)
        result = static_equilibrium(contacts, com, robot.mass)
    except (DegenerateInput, DegenerateSupport):
        return -np.inf, 0.0, True, False
    if not result.feasible:
        margin = -np.inf
    ratio = 0.0
    support_ik = True
    held_ik = True
    rot = geo.yaw_matrix(yaw)
    forces = result.forces if result.forces is not None else np.zeros((len(contacts), 3))
    for i, (contact, force) in enumerate(zip(contacts, forces)):
        limb = robot.limb(contact.limb_id)
        q = limb_ik_feasible(limb, rot.T @ (contact.position - pos))
        if q is None:
            if hold_ik and i == len(contacts) - 1:
                held_ik = False
            else:
                support_ik = False
            continue
        tau = static_torques(limb, q, rot.T @ force)
        ratio = max(ratio, float(np.abs(tau).max()) / robot.tau_max)
    return margin, ratio, support_ik, held_ik


def _check_step(robot: RobotModel, prev: Stance, cur: Stance, step_index: int,
                env_tris, params: ValidatorParams) -> StepCheck:
    """The root travels from the previous stance pose to the next while the
    walk stays quasi-static. The stepping foot may stay grounded for a prefix
    of the motion (four supports including its old contact), swings across a
    middle window on the three shared supports, and may touch down before the
    arrival pose (four supports including the new contact). The step passes
    if some lift/touchdown schedule keeps the support margin above the floor
    for the whole motion while every loaded contact stays reachable; the
    reported margin is the best achievable over schedules."""
    moved = contact_diff(prev, cur)
    if len(moved) != 1:
        return StepCheck(step_index, ",".join(moved) or "-", False, "structure",
                         np.nan, np.nan, np.nan)
    limb_id = moved[0]
    limb_idx = LIMB_ORDER.index(limb_id)
    shared = shared_contacts(list(prev.contacts), list(cur.contacts))
    pre4 = shared + [prev.contacts[limb_idx]]
    post4 = shared + [cur.contacts[limb_idx]]

    n = params.n_points
    dyaw = _wrap_angle(cur.root_yaw - prev.root_yaw)
    m3 = np.empty(n)
    ma = np.empty(n)
    mb = np.empty(n)
    tau3 = np.zeros(n)
    taua = np.zeros(n)
    taub = np.zeros(n)
    ik_shared = True
    for i, t in enumerate(np.linspace(0.0, 1.0, n)):
        pos = (1.0 - t) * prev.root_position + t * cur.root_position
        yaw = prev.root_yaw + t * dyaw
        m3[i], tau3[i], ok3, _ = _pose_metrics(robot, shared, pos, yaw, False)
        ma[i], taua[i], oka, held_ok = _pose_metrics(robot, pre4, pos, yaw, True)
        mb[i], taub[i], okb, land_ok = _pose_metrics(robot, post4, pos, yaw, True)
        ik_shared = ik_shared and ok3 and oka and okb
        if not held_ok:
            ma[i] = -np.inf  # the old contact cannot be held here; lift first
        if not land_ok:
            mb[i] = -np.inf  # the new contact is out of reach; land later

    # Best schedule: old contact loaded for poses < j, airborne j..l-1, new
    # contact loaded from pose l on. At least one airborne pose is required;
    # j = 0 lifts immediately and l = n - 1 lands at the arrival pose.
    suffix_b = np.minimum.accumulate(mb[::-1])[::-1]
    best = -np.inf
    best_j, best_l = 0, n - 1
    prefix_a = np.inf
    for j in range(n - 1):
        if j > 0:
            prefix_a = min(prefix_a, ma[j - 1])
        mid3 = np.inf
        for land in range(j + 1, n):
            mid3 = min(mid3, m3[land - 1])
            cand = min(prefix_a, mid3, suffix_b[land])
            if cand > best:
                best, best_j, best_l = cand, j, land
    max_ratio = float(max(taua[:best_j].max(initial=0.0),
                          tau3[best_j:best_l].max(initial=0.0),
                          taub[best_l:].max(initial=0.0)))

    collides, clearance = _swing_check(
        prev.contacts[limb_idx].position, cur.contacts[limb_idx].position,
        env_tris, params,
    )

    cause = None
    if best < params.margin_min:
        cause = "support-margin"
    elif not ik_shared:
        cause = "ik-failure"
    elif max_ratio > 1.0:
        cause = "torque-limit"
    elif collides:
        cause = "swing-collision"
    return StepCheck(step_index, limb_id, cause is None, cause,
                     float(best), float(max_ratio), float(clearance))


def validate_plan(plan: ContactPlan, robot: RobotModel,
                  env: TriMesh | np.ndarray,
                  params: ValidatorParams | None = None) -> PlanReport:
    if params is None:
        params = ValidatorParams()
    env_tris = env.tri_verts if isinstance(env, TriMesh) else env

    stance_margins = []
    bad_stances = []
    for i, s in enumerate(plan.stances):
        try:
            result = static_equilibrium(
                list(s.contacts), robot.com_world(s.root_position, s.root_yaw),
                robot.mass,
            )
            margin = result.margin if result.feasible else -np.inf
        except DegenerateInput:
            margin = -np.inf
        stance_margins.append(float(margin))
        if not margin > 0.0:
            bad_stances.append(i)

    steps = [
        _check_step(robot, plan.stances[i], plan.stances[i + 1], i, env_tris, params)
        for i in range(len(plan.stances) - 1)
    ]
    valid = not bad_stances and all(s.ok for s in steps)

    # earliest failure wins; an unstable stance counts at the step that
    # produced it (the initial stance precedes every step)
    events = [(i - 1, 1, "support-margin") for i in bad_stances]
    events += [(s.index, 0, s.cause) for s in steps if not s.ok]
    cause = min(events)[2] if events else "none"
    return PlanReport(valid, stance_margins, steps, cause)


def format_report(report: PlanReport) -> str:
    lines = []
    verdict = "VALID" if report.valid else f"INVALID ({report.failure_cause})"
    lines.append(f"plan {verdict}: {len(report.stance_margins)} stances, "
                 f"{len(report.steps)} steps")
    worst = min(report.stance_margins) if report.stance_margins else np.nan
    lines.append(f"stance equilibrium margin: worst {worst:.3f} N")
    for s in report.steps:
        if s.ok:
            lines.append(
                f"  step {s.index:3d} {s.limb_id}  ok   "
                f"margin={s.min_margin:7.4f} m  tau={s.max_torque_ratio:5.2f}  "
                f"clear={s.swing_clearance:7.4f} m"
            )
        else:
            lines.append(
                f"  step {s.index:3d} {s.limb_id}  FAIL {s.cause}  "
                f"margin={s.min_margin:7.4f} m  tau={s.max_torque_ratio:5.2f}  "
                f"clear={s.swing_clearance:7.4f} m"
            )
    counts = report.failure_counts()
    if counts:
        summary = ", ".join(f"{k}: {v}" for k, v in sorted(counts.items()))
        lines.append(f"failures by cause: {summary}")
    return "\n".join(lines)
