"""Acyclic contact planning along a guide path.

The root trajectory is discretized into equidistant intervals. Over each
interval the planner tries to keep all four feet planted by re-solving the
per-leg IK at the interval's end pose; a contact that cannot be kept names
the stepping leg. When several contacts would break at once the interval is
bisected until exactly one breaks. New contacts come from the offline sample
database: candidates are ranked by a weighted sum of the offline posture
score and the squared distance to a look-ahead reference foot position, then
projected onto a surface and accepted if the leg is collision-free, the new
stance is statically stable, and the quasi-static transition from the old
stance is feasible. On uniform terrain the emerging step order settles into
a fixed four-beat cycle; the initial stance staggers the feet fore-aft so the
first break is unambiguous.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .affordance import AffordanceSurface, project_point
from .equilibrium import Contact, static_equilibrium, transition_feasible
from .errors import (
    CandidatesExhausted,
    DegenerateInput,
    NoCandidate,
    ScenarioError,
    Stuck,
    SubdivisionExhausted,
)
from .guide import RootPath, RootState
from .mesh import TriMesh
from .robot import (
    LIMB_ORDER,
    RobotModel,
    knee_position,
    limb_fk,
    limb_ik_feasible,
)

# fore-aft offsets (m) added to each standing foot. All strides have the same
# length, so the phase each leg is born with persists for the whole walk; the
# offsets are staggered so contacts break one at a time in the left-hind,
# left-front, right-hind, right-front cycle from the first step on, with the
# hind offsets pulled in far enough that the body is already over the support
# diagonal when the first hind contacts reach their rearward reach limit.
DEFAULT_STAGGER = {"LF": -0.05, "RF": 0.11, "LH": -0.12, "RH": 0.06}

FOOT_SEPARATION_MIN = 0.03
FOOT_HIT_EXCLUSION = 0.015  # ignore shank/terrain hits this close to the foot


@dataclass(frozen=True)
class PlannerParams:
    delta: float = 0.04  # root discretization interval (m)
    dt_ref: float = 1.6  # look-ahead for the reference foot position (s)
    w_offline: float = 1.0
    w_online: float = 10.0
    max_candidates: int = 200
    max_subdivision: int = 6
    step_horizon: float = 0.25  # sets the break lookahead, 4x this arc (m)
    window_floor: float = 0.04  # support margin below which a swing steps early (m)

    def __post_init__(self):
        vals = (self.delta, self.dt_ref, self.w_offline, self.w_online,
                self.max_candidates, self.max_subdivision,
                self.step_horizon, self.window_floor)
        if min(vals) <= 0:
            raise ValueError("planner parameters must be positive")


@dataclass(frozen=True)
class Stance:
    """Whole-body configuration with all four feet in contact."""

    root_position: np.ndarray
    root_yaw: float
    q: np.ndarray  # (4, 3) joint angles in LIMB_ORDER
    contacts: tuple  # 4 Contact in LIMB_ORDER
    margin: float  # equilibrium margin (N)

    def __post_init__(self):
        object.__setattr__(self, "root_position",
                           np.asarray(self.root_position, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(4, 3))

    def contact(self, limb_id: str) -> Contact:
        return self.contacts[LIMB_ORDER.index(limb_id)]


@dataclass(frozen=True)
class StepRecord:
    index: int
    limb_id: str
    interval_index: int
    arc: float
    depth: int
    candidates_tried: int


@dataclass
class ContactPlan:
    stances: list
    step_log: list = field(default_factory=list)
    goal_residual: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.step_log)

    def stepping_sequence(self) -> list:
        return [rec.limb_id for rec in self.step_log]


def online_score(sample_foot_world, reference) -> float:
    d = np.asarray(sample_foot_world, dtype=float) - np.asarray(reference, dtype=float)
    return float(d @ d)


def contact_diff(stance_a: Stance, stance_b: Stance) -> list:
    """Limb ids whose contact placement differs between two stances."""
    return [
        lid
        for lid, ca, cb in zip(LIMB_ORDER, stance_a.contacts, stance_b.contacts)
        if not ca.same_placement(cb)
    ]


# ---------------------------------------------------------------------------
# Leg-level collision and contact maintenance
# ---------------------------------------------------------------------------


def _leg_collides(env_tris, hip_w, knee_w, foot_w) -> bool:
    """Thigh or shank segment against terrain; hits at the foot are the
    contact itself and don't count."""
    seg_idx, pts = geo.segments_hit_triangles(
        np.array([hip_w, knee_w]), np.array([knee_w, foot_w]), env_tris
    )
    for si, p in zip(seg_idx, pts):
        if si == 0:
            return True  # thigh never legitimately touches terrain
        if np.linalg.norm(p - foot_w) > FOOT_HIT_EXCLUSION:
            return True
    return False


def maintain_contacts(robot: RobotModel, stance: Stance, new_root: RootState,
                      env_tris) -> tuple:
    """Try to keep every contact while the root moves to `new_root`.

    Returns (q_new (4,3), flags (4,)) where flags[i] says limb i kept its
    contact: IK solvable within joint limits and the leg stays clear of the
    terrain.
    """
    rot = geo.yaw_matrix(new_root.yaw)
    pos = new_root.position
    q_new = stance.q.copy()
    flags = np.zeros(4, dtype=bool)
    for i, limb in enumerate(robot.limbs):
        target_t = rot.T @ (stance.contacts[i].position - pos)
        q = limb_ik_feasible(limb, target_t)
        if q is None:
            continue
        knee_w = rot @ knee_position(limb, q) + pos
        hip_w = rot @ limb.hip_offset + pos
        if _leg_collides(env_tris, hip_w, knee_w, stance.contacts[i].position):
            continue
        q_new[i] = q
        flags[i] = True
    return q_new, flags


# ---------------------------------------------------------------------------
# Contact generation
# ---------------------------------------------------------------------------


def _reference_foot(robot: RobotModel, limb_idx: int, ref_state: RootState,
                    lateral_scale: float = 1.0) -> np.ndarray:
    limb = robot.limbs[limb_idx]
    rot = geo.yaw_matrix(ref_state.yaw)
    foot_t = limb_fk(limb, limb.q_standing).copy()
    foot_t[1] *= lateral_scale
    return rot @ foot_t + ref_state.position


def _turn_lane_scale(root_state: RootState, ref_state: RootState) -> float:
    """Lateral shrink for the landing reference while the trunk is turning.

    Feet at full track width make the support diagonals swing wide in a
    turn, so the swing triangle of an outside leg only encloses the weight
    long after that leg's old contact has expired. Tracking a narrower lane
    keeps the weight encircled through the turn. Straight travel keeps the
    full width."""
    d = ref_state.position[:2] - root_state.position[:2]
    dist = float(np.hypot(d[0], d[1]))
    dyaw = abs(float(np.arctan2(np.sin(ref_state.yaw - root_state.yaw),
                                np.cos(ref_state.yaw - root_state.yaw))))
    rate = dyaw / max(dist, 0.05)
    return max(1.0 / (1.0 + 1.4 * rate), 0.6)


def generate_contact(robot: RobotModel, stance: Stance, limb_id: str,
                     root_state: RootState, ref_state: RootState, db,
                     env_tris, surfaces, params: PlannerParams,
                     q_maintained=None, exclude_near=None,
                     rank_near=None, post_ok=None):
    """Pick a new contact for the stepping leg at `root_state`.

    Returns (contact, q_leg, candidates_tried, new_margin). Raises
    NoCandidate when the database query comes back empty and
    CandidatesExhausted when every ranked candidate fails a check.
    `exclude_near` drops landings within 5 cm of that world point; it is
    used when re-placing a foot that could otherwise land where it stands.
    `rank_near` overrides the look-ahead reference as the ranking target,
    and `post_ok(new_contacts)` adds a final acceptance predicate; both
    serve corrective repositioning rather than ordinary forward steps.
    """
    limb_idx = LIMB_ORDER.index(limb_id)
    limb = robot.limbs[limb_idx]
    rot = geo.yaw_matrix(root_state.yaw)
    pos = root_state.position

    idx = db.query_indices(pos, root_state.yaw, surfaces)
    if len(idx) == 0:
        raise NoCandidate(f"{limb_id}: no database sample near any surface")

    feet_w = db.foot[idx] @ rot.T + pos
    if rank_near is None:
        scale = _turn_lane_scale(root_state, ref_state)
        reference = _reference_foot(robot, limb_idx, ref_state, scale)
    else:
        reference = np.asarray(rank_near, dtype=float)
    total = params.w_offline * db.score[idx] + params.w_online * np.einsum(
        "ij,ij->i", feet_w - reference, feet_w - reference
    )
    ranked = np.lexsort((idx, total))

    if q_maintained is None:
        q_maintained, _ = maintain_contacts(robot, stance, root_state, env_tris)
    others = [stance.contacts[j] for j in range(4) if j != limb_idx]
    other_feet = np.array([c.position for c in others])
    com_old = robot.com_world(stance.root_position, stance.root_yaw)
    com_new = robot.com_world(pos, root_state.yaw)
    hip_w = rot @ limb.hip_offset + pos

    tried = 0
    for r in ranked:
        if tried >= params.max_candidates:
            break
        foot_w = feet_w[r]
        placed = _nearest_projection(surfaces, foot_w)
        if placed is None:
            continue
        surf, point = placed
        tried += 1
        if exclude_near is not None \
                and float(np.linalg.norm(point - exclude_near)) < 0.05:
            continue
        if np.min(np.linalg.norm(other_feet - point, axis=1)) < FOOT_SEPARATION_MIN:
            continue
        q_leg = limb_ik_feasible(limb, rot.T @ (point - pos))
        if q_leg is None:
            continue
        knee_w = rot @ knee_position(limb, q_leg) + pos
        if _leg_collides(env_tris, hip_w, knee_w, point):
            continue
        contact = Contact(limb_id, point, surf.normal, robot.mu_default, surf.id)
        new_contacts = [
            contact if j == limb_idx else stance.contacts[j] for j in range(4)
        ]
        try:
            result = static_equilibrium(new_contacts, com_new, robot.mass)
        except DegenerateInput:
            continue
        if not result.feasible or result.margin <= 0.0:
            continue
        if not transition_feasible(list(stance.contacts), new_contacts,
                                   com_old, com_new, robot.mass):
            continue
        if post_ok is not None and not post_ok(new_contacts):
            continue
        return contact, q_leg, tried, result.margin
    raise CandidatesExhausted(
        f"{limb_id}: {tried} candidates failed at arc-root "
        f"({pos[0]:.3f}, {pos[1]:.3f}, {pos[2]:.3f})"
    )


def _nearest_projection(surfaces, p):
    best = None
    best_d = np.inf
    for s in surfaces:
        q = project_point(s, p)
        d = float(np.linalg.norm(q - p))
        if d < best_d - 1e-12:
            best, best_d = (s, q), d
    return best


# ---------------------------------------------------------------------------
# Whole-plan loop
# ---------------------------------------------------------------------------


def initial_stance(robot: RobotModel, root: RootState, surfaces,
                   env_tris, stagger=None) -> Stance:
    """All-fours stance under the given root, feet staggered fore-aft and
    projected onto the nearest surface."""
    if stagger is None:
        stagger = DEFAULT_STAGGER
    rot = geo.yaw_matrix(root.yaw)
    pos = root.position
    contacts = []
    q = np.zeros((4, 3))
    for i, limb in enumerate(robot.limbs):
        nominal_t = limb.hip_offset + np.array([
            stagger[limb.id], 0.0, -robot.standing_height
        ])
        placed = _nearest_projection(surfaces, rot @ nominal_t + pos)
        if placed is None:
            raise ScenarioError("no contact surface near the start stance")
        surf, point = placed
        qi = limb_ik_feasible(limb, rot.T @ (point - pos))
        if qi is None:
            raise ScenarioError(f"initial stance unreachable for {limb.id}")
        knee_w = rot @ knee_position(limb, qi) + pos
        hip_w = rot @ limb.hip_offset + pos
        if _leg_collides(env_tris, hip_w, knee_w, point):
            raise ScenarioError(f"initial stance collides for {limb.id}")
        q[i] = qi
        contacts.append(Contact(limb.id, point, surf.normal, robot.mu_default, surf.id))
    result = static_equilibrium(contacts, robot.com_world(pos, root.yaw), robot.mass)
    if not result.feasible:
        raise ScenarioError("initial stance is not statically stable")
    return Stance(pos, root.yaw, q, tuple(contacts), result.margin)


def _tri_margin_xy(p, tri) -> float:
    """Signed distance of 2D point p to the triangle boundary, positive
    inside. Orientation of the vertices does not matter."""
    p = np.asarray(p, dtype=float)[:2]
    v = [np.asarray(t, dtype=float)[:2] for t in tri]
    best = np.inf
    for i in range(3):
        a, b = v[i], v[(i + 1) % 3]
        e = b - a
        ln = float(np.hypot(e[0], e[1]))
        if ln < 1e-12:
            return -np.inf
        d = float(e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0])) / ln
        c = v[(i + 2) % 3]
        dc = float(e[0] * (c[1] - a[1]) - e[1] * (c[0] - a[0])) / ln
        if abs(dc) < 1e-12:
            return -np.inf
        best = min(best, d if dc > 0 else -d)
    return best


def _holds_at(robot, limb_idx, point, state, env_tris):
    """Whether limb `limb_idx` could still hold a contact at `point` once
    the root has moved on to `state`."""
    limb = robot.limbs[limb_idx]
    rot = geo.yaw_matrix(state.yaw)
    q = limb_ik_feasible(limb, rot.T @ (point - state.position))
    if q is None:
        return False
    knee_w = rot @ knee_position(limb, q) + state.position
    hip_w = rot @ limb.hip_offset + state.position
    return not _leg_collides(env_tris, hip_w, knee_w, point)


def _step_one_of(robot, stance, limb_indices, path, arc, dbs, env_tris,
                 surfaces, params, blocked_idx=None, keep_state=None,
                 min_window=None):
    """Step the first limb in `limb_indices` that admits a new contact at
    the given arc. Returns (stance, limb_id, candidates_tried) or None when
    none of them can be stepped there. The walk uses this to recover when
    the leg that ought to swing cannot: another leg goes first and shifts
    the support polygon.

    With `blocked_idx` set, the repositioning is corrective: candidates
    rank by smallest displacement from where the foot stands, and only
    landings that leave the body weight at least 5 cm inside the support
    triangle the blocked leg will swing over are accepted.

    With `keep_state` set, only landings the limb could still hold at that
    future root pose are accepted, so a step taken early actually outlives
    the contact it replaces instead of expiring right away.

    With `min_window` set, a limb is skipped outright when the weight sits
    closer than this to the edge of the triangle the swing would rest on;
    a step that barely balances is worse than keeping the contact."""
    state_a = path.state_at_arc(arc)
    q_a, flags_a = maintain_contacts(robot, stance, state_a, env_tris)
    ref_state = path.state_at_time(state_a.time + params.dt_ref)
    com_xy = robot.com_world(state_a.position, state_a.yaw)[:2]
    for limb_idx in limb_indices:
        if not all(bool(flags_a[j]) for j in range(4) if j != limb_idx):
            continue
        if min_window is not None:
            tri = [stance.contacts[j].position for j in range(4)
                   if j != limb_idx]
            if _tri_margin_xy(com_xy, tri) < min_window:
                continue
        limb_id = LIMB_ORDER[limb_idx]
        rank_near = None
        post_ok = None
        if blocked_idx is not None and blocked_idx != limb_idx:
            rank_near = stance.contacts[limb_idx].position

            def post_ok(new_contacts, _b=blocked_idx):
                tri = [new_contacts[j].position for j in range(4) if j != _b]
                return _tri_margin_xy(com_xy, tri) >= 0.05

        if keep_state is not None:

            def post_ok(new_contacts, _i=limb_idx, _prev=post_ok):
                if not _holds_at(robot, _i, new_contacts[_i].position,
                                 keep_state, env_tris):
                    return False
                return True if _prev is None else _prev(new_contacts)

        try:
            contact, q_leg, tried, margin = generate_contact(
                robot, stance, limb_id, state_a, ref_state, dbs[limb_id],
                env_tris, surfaces, params, q_maintained=q_a,
                exclude_near=stance.contacts[limb_idx].position,
                rank_near=rank_near, post_ok=post_ok,
            )
        except (NoCandidate, CandidatesExhausted):
            continue
        q_new = q_a.copy()
        q_new[limb_idx] = q_leg
        new_contacts = tuple(
            contact if j == limb_idx else stance.contacts[j] for j in range(4)
        )
        return (
            Stance(state_a.position, state_a.yaw, q_new, new_contacts, margin),
            limb_id,
            tried,
        )
    return None


def _staleness_order(step_log, include):
    """Limb indices from `include`, least recently stepped first."""
    last = {i: -1 for i in include}
    for rec in step_log:
        idx = LIMB_ORDER.index(rec.limb_id)
        if idx in last:
            last[idx] = rec.index
    return sorted(include, key=lambda i: last[i])


def _next_break(robot, stance, path, s_from, env_tris, params):
    """First arc past `s_from` where some contact can no longer be held,
    scanning forward on the planner grid. Returns (arc, limb_indices) or
    (None, []) when every contact survives the whole lookahead."""
    cap = min(s_from + 4.0 * params.step_horizon, path.length)
    s = s_from
    while s < cap - 1e-9:
        s = min(s + params.delta, cap)
        state = path.state_at_arc(s)
        _, flags = maintain_contacts(robot, stance, state, env_tris)
        if not flags.all():
            return s, list(np.nonzero(~flags)[0])
    return None, []


def _successor_guard(robot, stance, path, s_step, limb_idx, flags, env_tris,
                     params):
    """Landing filter protecting the next leg that breaks after this one.
    A landing is rejected when that leg, at its own break, would be left
    with the weight outside the triangle it swings over. Only the first
    successor is guarded: the fate of later legs depends on steps that have
    not been decided yet.

    Returns (guard, endangered) where `endangered` lists the limbs breaking
    at that arc, tightest window first, or None when no other leg breaks
    within the lookahead."""
    s_look = min(s_step + params.step_horizon, path.length)
    if s_look <= s_step + 1e-9:
        return None
    others = [k for k in range(4) if k != limb_idx and flags[k]]
    breaks = {}
    s = s_step
    while s < s_look - 1e-9 and not breaks:
        s = min(s + params.delta, s_look)
        state = path.state_at_arc(s)
        _, f = maintain_contacts(robot, stance, state, env_tris)
        for k in others:
            if not f[k]:
                breaks[k] = robot.com_world(state.position, state.yaw)
    if not breaks:
        return None

    def guard(new_contacts):
        for k, com_k in breaks.items():
            tri = [new_contacts[j].position for j in range(4) if j != k]
            if _tri_margin_xy(com_k, tri) < 0.03:
                return False
        return True

    def current_margin(k):
        tri = [stance.contacts[j].position for j in range(4) if j != k]
        return _tri_margin_xy(breaks[k], tri)

    endangered = sorted(breaks, key=current_margin)
    return guard, endangered


def _preempt_plan(robot, stance, path, s_from, env_tris, params):
    """Decide whether the next contact break needs an early step.

    The walk normally steps a leg at the last root pose that still holds
    its old contact. During a turn that moment can arrive after the weight
    has already left the triangle the swing must balance on, and no landing
    is feasible any more. Scanning ahead to the next break and checking the
    breaking leg's support margin there catches this case early: the leg is
    then scheduled to swing at the latest arc where the margin is still
    acceptable, instead of at the break itself.

    Returns (step_arc, limb_idx, keep_arc) or None when the ordinary
    event-driven step is safe. `keep_arc` is how far the early landing must
    itself remain holdable so the step actually outlives the old contact."""
    s_break, limbs = _next_break(robot, stance, path, s_from, env_tris, params)
    if s_break is None:
        return None
    state_break = path.state_at_arc(s_break)
    com_break = robot.com_world(state_break.position, state_break.yaw)
    best = None
    for i in limbs:
        tri = [stance.contacts[j].position for j in range(4) if j != i]
        m_break = _tri_margin_xy(com_break, tri)
        if m_break >= params.window_floor:
            continue
        n = max(int(np.ceil((s_break - s_from) / params.delta)), 1)
        arcs = np.linspace(s_from, s_break, n + 1)[:-1]
        margins = np.empty(arcs.shape)
        for k, s in enumerate(arcs):
            st = path.state_at_arc(s)
            margins[k] = _tri_margin_xy(
                robot.com_world(st.position, st.yaw), tri)
        good = np.nonzero(margins >= params.window_floor)[0]
        if good.size:
            s_step = float(arcs[good[-1]])
        elif margins.max() >= 0.015 and margins.max() > m_break:
            # the window never opens properly before the break; stepping at
            # the best available margin still beats waiting for the break
            s_step = float(arcs[int(margins.argmax())])
        else:
            continue
        if best is None or s_step < best[0]:
            best = (s_step, i, min(s_break + 0.2, path.length))
    return best


def plan_contacts(path: RootPath, start_stance: Stance, robot: RobotModel,
                  dbs: dict, env: TriMesh | np.ndarray, surfaces,
                  params: PlannerParams) -> ContactPlan:
    """Walk the discretized path, stepping one leg whenever its contact can
    no longer be kept. See the module docstring for the full procedure."""
    env_tris = env.tri_verts if isinstance(env, TriMesh) else env
    _, arcs = path.discretize(params.delta)

    stance = start_stance
    stances = [start_stance]
    step_log = []
    budget = 50 * max(len(arcs), 2)
    processed = 0
    pending = _preempt_plan(robot, stance, path, 0.0, env_tris, params)

    for base_idx in range(len(arcs) - 1):
        intervals = [(arcs[base_idx], arcs[base_idx + 1], 0)]
        rescues_left = 8
        while intervals:
            a, b, depth = intervals.pop()
            processed += 1
            if processed > budget:
                raise Stuck(f"interval budget exhausted near arc {a:.3f}")
            if b - a < 1e-12:
                continue
            state_b = path.state_at_arc(b)
            q_new, flags = maintain_contacts(robot, stance, state_b, env_tris)
            n_fail = int((~flags).sum())
            if pending is not None and b >= pending[0] - 1e-9:
                s_step, p_limb, keep_arc = pending
                pending = None
                arc_fire = min(max(s_step, a), b)
                stepped = _step_one_of(
                    robot, stance, [p_limb], path, arc_fire, dbs,
                    env_tris, surfaces, params,
                    keep_state=path.state_at_arc(keep_arc),
                    min_window=0.015,
                )
                if stepped is not None:
                    stance, limb_id, tried = stepped
                    stances.append(stance)
                    step_log.append(StepRecord(
                        index=len(step_log), limb_id=limb_id,
                        interval_index=base_idx, arc=float(arc_fire),
                        depth=depth, candidates_tried=tried,
                    ))
                    pending = _preempt_plan(robot, stance, path,
                                            arc_fire, env_tris, params)
                    intervals.append((a, b, depth))
                    continue
            if n_fail == 0:
                stance = Stance(state_b.position, state_b.yaw, q_new,
                                stance.contacts, stance.margin)
                continue
            if n_fail > 1:
                if depth >= params.max_subdivision:
                    # several contacts break within a hair of root travel;
                    # retire them one at a time at the interval start, where
                    # everything still holds, then re-examine the interval
                    broken = _staleness_order(
                        step_log, list(np.nonzero(~flags)[0])
                    )
                    holding = _staleness_order(
                        step_log, list(np.nonzero(flags)[0])
                    )
                    stepped = None
                    if rescues_left > 0:
                        stepped = _step_one_of(
                            robot, stance, broken, path, a, dbs,
                            env_tris, surfaces, params,
                        )
                        if stepped is None:
                            stepped = _step_one_of(
                                robot, stance, holding, path, a, dbs,
                                env_tris, surfaces, params,
                                blocked_idx=broken[0],
                            )
                    if stepped is None:
                        failing = [LIMB_ORDER[i] for i in np.nonzero(~flags)[0]]
                        raise SubdivisionExhausted(
                            f"{failing} all break in interval {base_idx} "
                            f"({a:.3f}..{b:.3f} m) at depth {depth}"
                        )
                    rescues_left -= 1
                    stance, limb_id, tried = stepped
                    stances.append(stance)
                    step_log.append(StepRecord(
                        index=len(step_log), limb_id=limb_id,
                        interval_index=base_idx, arc=float(a), depth=depth,
                        candidates_tried=tried,
                    ))
                    pending = _preempt_plan(robot, stance, path, a,
                                            env_tris, params)
                    intervals.append((a, b, depth))
                    continue
                mid = 0.5 * (a + b)
                intervals.append((mid, b, depth + 1))
                intervals.append((a, mid, depth + 1))
                continue
            limb_idx = int(np.nonzero(~flags)[0][0])
            limb_id = LIMB_ORDER[limb_idx]
            ref_state = path.state_at_time(state_b.time + params.dt_ref)
            guarded = _successor_guard(robot, stance, path, b, limb_idx,
                                       flags, env_tris, params)
            try:
                contact = None
                if guarded is not None:
                    succ_ok, endangered = guarded
                    try:
                        contact, q_leg, tried, margin = generate_contact(
                            robot, stance, limb_id, state_b, ref_state,
                            dbs[limb_id], env_tris, surfaces, params,
                            q_maintained=q_new, post_ok=succ_ok,
                        )
                    except CandidatesExhausted:
                        # no landing protects the legs due right after this
                        # one. Swing the most endangered of them first, at
                        # the interval start where this leg still holds,
                        # and come back to this break with fresh support.
                        stepped = _step_one_of(
                            robot, stance, endangered, path, a, dbs,
                            env_tris, surfaces, params,
                            keep_state=path.state_at_arc(
                                min(b + 0.2, path.length)),
                            min_window=0.025,
                        )
                        if stepped is not None:
                            stance, order_id, tried = stepped
                            stances.append(stance)
                            step_log.append(StepRecord(
                                index=len(step_log), limb_id=order_id,
                                interval_index=base_idx, arc=float(a),
                                depth=depth, candidates_tried=tried,
                            ))
                            pending = _preempt_plan(robot, stance, path, a,
                                                    env_tris, params)
                            intervals.append((a, b, depth))
                            continue
                if contact is None:
                    contact, q_leg, tried, margin = generate_contact(
                        robot, stance, limb_id, state_b, ref_state,
                        dbs[limb_id], env_tris, surfaces, params,
                        q_maintained=q_new,
                    )
            except CandidatesExhausted:
                # the leg that has to swing cannot be placed anywhere the
                # body can balance over the remaining three. When the
                # interval can still be split, let the body creep closer to
                # the break first: the balance check sweeps the weight from
                # the previous stance pose, and a swing triangle that only
                # admits the weight near the break needs a short sweep.
                if depth < params.max_subdivision:
                    mid = 0.5 * (a + b)
                    intervals.append((mid, b, depth + 1))
                    intervals.append((a, mid, depth + 1))
                    continue
                # otherwise reposition one of the holding legs so the
                # weight ends up inside the support triangle the blocked
                # leg swings over, then retry the blocked leg.
                holding = _staleness_order(
                    step_log, [j for j in range(4) if j != limb_idx]
                )
                stepped = None
                if rescues_left > 0:
                    stepped = _step_one_of(
                        robot, stance, holding, path, a, dbs, env_tris,
                        surfaces, params, blocked_idx=limb_idx,
                    )
                if stepped is None:
                    raise
                rescues_left -= 1
                stance, helper_id, tried = stepped
                stances.append(stance)
                step_log.append(StepRecord(
                    index=len(step_log), limb_id=helper_id,
                    interval_index=base_idx, arc=float(a), depth=depth,
                    candidates_tried=tried,
                ))
                pending = _preempt_plan(robot, stance, path, a,
                                        env_tris, params)
                intervals.append((a, b, depth))
                continue
            q_new[limb_idx] = q_leg
            new_contacts = tuple(
                contact if j == limb_idx else stance.contacts[j] for j in range(4)
            )
            stance = Stance(state_b.position, state_b.yaw, q_new, new_contacts, margin)
            stances.append(stance)
            step_log.append(StepRecord(
                index=len(step_log), limb_id=limb_id, interval_index=base_idx,
                arc=float(b), depth=depth, candidates_tried=tried,
            ))
            pending = _preempt_plan(robot, stance, path, b, env_tris, params)

    goal_residual = 0.0
    if step_log:
        # carry the final stance to the very end of the path
        end_state = path.state_at_arc(path.length)
        q_end, flags = maintain_contacts(robot, stance, end_state, env_tris)
        if flags.all():
            result = static_equilibrium(
                list(stance.contacts),
                robot.com_world(end_state.position, end_state.yaw),
                robot.mass,
            )
            stances[-1] = Stance(end_state.position, end_state.yaw, q_end,
                                 stance.contacts, result.margin)
        else:
            goal_residual = float(
                np.linalg.norm(end_state.position - stances[-1].root_position)
            )
    return ContactPlan(stances, step_log, goal_residual)


# ---------------------------------------------------------------------------
# Plan files
# ---------------------------------------------------------------------------


def plan_to_json(plan: ContactPlan, meta: dict | None = None) -> str:
    doc = {
        "format": "contact-plan",
        "version": 1,
        "meta": dict(meta or {}),
        "goal_residual": plan.goal_residual,
        "stances": [
            {
                "root_position": [float(x) for x in s.root_position],
                "root_yaw": float(s.root_yaw),
                "q": [float(x) for x in s.q.ravel()],
                "margin": float(s.margin),
                "contacts": [
                    {
                        "limb": c.limb_id,
                        "position": [float(x) for x in c.position],
                        "normal": [float(x) for x in c.normal],
                        "mu": float(c.mu),
                        "surface": int(c.surface_id),
                    }
                    for c in s.contacts
                ],
            }
            for s in plan.stances
        ],
        "step_log": [
            {
                "index": r.index,
                "limb": r.limb_id,
                "interval": r.interval_index,
                "arc": float(r.arc),
                "depth": r.depth,
                "candidates_tried": r.candidates_tried,
            }
            for r in plan.step_log
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def plan_from_json(text: str) -> tuple:
    doc = json.loads(text)
    if doc.get("format") != "contact-plan" or doc.get("version") != 1:
        raise ScenarioError("not a contact-plan file (or unsupported version)")
    stances = []
    for s in doc["stances"]:
        contacts = tuple(
            Contact(c["limb"], np.array(c["position"]), np.array(c["normal"]),
                    float(c["mu"]), int(c["surface"]))
            for c in s["contacts"]
        )
        if tuple(c.limb_id for c in contacts) != LIMB_ORDER:
            raise ScenarioError("plan stance contacts out of order")
        stances.append(Stance(
            np.array(s["root_position"]), float(s["root_yaw"]),
            np.array(s["q"]).reshape(4, 3), contacts, float(s["margin"]),
        ))
    step_log = [
        StepRecord(r["index"], r["limb"], r["interval"], float(r["arc"]),
                   r["depth"], r["candidates_tried"])
        for r in doc["step_log"]
    ]
    plan = ContactPlan(stances, step_log, float(doc.get("goal_residual", 0.0)))
    return plan, doc.get("meta", {})
