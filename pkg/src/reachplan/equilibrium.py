"""Static equilibrium under linearized friction cones.

Feasibility asks whether contact forces inside 4-sided friction pyramids can
balance gravity at a given center of mass. The robustness margin is the
largest uniform lower bound on every cone-generator coefficient for which the
balance stays solvable (a maximin slack, solved as a small LP). Forces are
solved with weight-normalized units internally; reported margins and forces
are in newtons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, QhullError

from . import geometry as geo
from .errors import DegenerateInput, DegenerateSupport

GRAVITY = 9.81
FEAS_TOL = 1e-8
COEF_BOUND = 10.0  # per-generator cap, in units of body weight


@dataclass(frozen=True)
class Contact:
    limb_id: str
    position: np.ndarray
    normal: np.ndarray
    mu: float
    surface_id: int = -1

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("contact normal must be unit length")
        object.__setattr__(self, "normal", n)
        if self.mu <= 0:
            raise ValueError("friction coefficient must be positive")

    def same_placement(self, other: "Contact", tol: float = 1e-9) -> bool:
        return (
            self.limb_id == other.limb_id
            and np.linalg.norm(self.position - other.position) <= tol
            and np.linalg.norm(self.normal - other.normal) <= tol
        )


@dataclass(frozen=True)
class EquilibriumResult:
    feasible: bool
    margin: float  # newtons; 0 when infeasible
    forces: np.ndarray | None = None  # (n_contacts, 3) newtons


def cone_generators(normal, mu: float) -> np.ndarray:
    """Four edge directions of the friction pyramid inscribed in the cone.

    Each generator has unit component along the normal, so a coefficient of c
    means c newtons of normal force.
    """
    n = np.asarray(normal, dtype=float)
    t1, t2 = geo.plane_basis(n)
    k = mu / np.sqrt(2.0)
    return np.array([
        n + k * (t1 + t2),
        n + k * (t1 - t2),
        n + k * (-t1 + t2),
        n + k * (-t1 - t2),
    ])


def _check_contacts(contacts):
    if len(contacts) == 0:
        raise DegenerateInput("at least one contact required")
    pts = np.array([c.position for c in contacts])
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if np.linalg.norm(pts[i] - pts[j]) < 1e-9:
                raise DegenerateInput(
                    f"contacts {contacts[i].limb_id}/{contacts[j].limb_id} coincide"
                )


def _wrench_matrix(contacts, com) -> np.ndarray:
    """6 x (4 * n) matrix mapping generator coefficients to (force, moment)."""
    com = np.asarray(com, dtype=float)
    cols = []
    for c in contacts:
        gens = cone_generators(c.normal, c.mu)
        arm = c.position - com
        for g in gens:
            cols.append(np.concatenate([g, np.cross(arm, g)]))
    return np.array(cols).T


_UNIT_WEIGHT = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])


def equilibrium_feasible(contacts, com, mass: float) -> bool:
    """Fast boolean check: does any in-cone force assignment balance gravity?

    Solved as a non-negative least squares fit of the unit-weight wrench;
    feasible when the residual vanishes (<= 1e-8).
    """
    _check_contacts(contacts)
    A = _wrench_matrix(contacts, com)
    _, rnorm = nnls(A, _UNIT_WEIGHT)
    return bool(rnorm <= FEAS_TOL)


def static_equilibrium(contacts, com, mass: float) -> EquilibriumResult:
    """Feasibility plus the maximin generator-coefficient margin.

    The margin maximizes r subject to the balance equalities, coefficient
    bounds c <= 10 body weights, and c >= r on every generator; it is 0 for
    infeasible stances and is reported in newtons.
    """
    _check_contacts(contacts)
    A = _wrench_matrix(contacts, com)
    m = A.shape[1]
    c0, rnorm = nnls(A, _UNIT_WEIGHT)
    if rnorm > FEAS_TOL:
        return EquilibriumResult(False, 0.0, None)
    scale = mass * GRAVITY
    # maximize r: variables (c, r)
    obj = np.zeros(m + 1)
    obj[-1] = -1.0
    a_ub = np.hstack([-np.eye(m), np.ones((m, 1))])  # r - c_i <= 0
    a_eq = np.hstack([A, np.zeros((6, 1))])
    res = linprog(
        obj,
        A_ub=a_ub, b_ub=np.zeros(m),
        A_eq=a_eq, b_eq=_UNIT_WEIGHT,
        bounds=[(0.0, COEF_BOUND)] * m + [(0.0, COEF_BOUND)],
        method="highs",
    )
    if res.status != 0:
        forces = _coefficients_to_forces(contacts, c0) * scale
        return EquilibriumResult(True, 0.0, forces)
    coef = res.x[:m]
    margin = float(res.x[-1]) * scale
    forces = _coefficients_to_forces(contacts, coef) * scale
    return EquilibriumResult(True, margin, forces)


def _coefficients_to_forces(contacts, coef: np.ndarray) -> np.ndarray:
    forces = np.zeros((len(contacts), 3))
    for i, c in enumerate(contacts):
        gens = cone_generators(c.normal, c.mu)
        forces[i] = coef[4 * i:4 * i + 4] @ gens
    return forces


def support_margin(contacts, com) -> float:
    """Signed distance (m) from the gravity projection of the CoM to the
    support polygon boundary; positive inside."""
    if len(contacts) < 3:
        raise DegenerateSupport(f"{len(contacts)} contacts cannot span a polygon")
    pts = np.array([c.position[:2] for c in contacts])
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateSupport("contact projections are collinear") from exc
    poly = pts[hull.vertices]  # counterclockwise
    com_xy = np.asarray(com, dtype=float)[:2]
    return geo.signed_distance_convex_2d(com_xy, poly)


def shared_contacts(contacts_a, contacts_b) -> list:
    """Contacts present in both stances (same limb, placement, normal)."""
    out = []
    for ca in contacts_a:
        for cb in contacts_b:
            if ca.same_placement(cb):
                out.append(ca)
                break
    return out


def transition_feasible(contacts_a, contacts_b, com_a, com_b, mass: float,
                        n_points: int = 11) -> bool:
    """Quasi-static transition test between two stances.

    Equilibrium on the shared contact set must hold at both endpoint CoM
    positions and at the interior points of the straight segment between them
    (n_points total).
    """
    shared = shared_contacts(contacts_a, contacts_b)
    if not shared:
        raise DegenerateInput("stances share no contact")
    com_a = np.asarray(com_a, dtype=float)
    com_b = np.asarray(com_b, dtype=float)
    for t in np.linspace(0.0, 1.0, n_points):
        if not equilibrium_feasible(shared, com_a + t * (com_b - com_a), mass):
            return False
    return True
