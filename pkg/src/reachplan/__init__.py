"""Contact planning for a parametric quadruped.

The pipeline runs in two stages: a bidirectional RRT plans a trunk guide
path whose every pose is reachability-validated (collision-free body, all
four leg workspaces over contact surfaces), then an acyclic contact planner
walks the path, replacing one foothold at a time from a precomputed sample
database. Plans are checked quasi-statically: friction-cone equilibrium,
joint torques, and swing-leg clearance.
"""

from .affordance import (
    AffordanceParams,
    AffordanceSurface,
    extract_affordances,
    inset_surface,
    load_affordances,
    dump_affordances,
)
from .contacts import (
    ContactPlan,
    PlannerParams,
    Stance,
    StepRecord,
    generate_contact,
    initial_stance,
    maintain_contacts,
    plan_contacts,
    plan_from_json,
    plan_to_json,
)
from .equilibrium import (
    Contact,
    EquilibriumResult,
    cone_generators,
    equilibrium_feasible,
    static_equilibrium,
    support_margin,
    transition_feasible,
)
from .errors import (
    BudgetExceeded,
    CandidatesExhausted,
    DatabaseMismatch,
    DegenerateHull,
    DegenerateInput,
    DegenerateSupport,
    GoalInvalid,
    InvalidSpec,
    NoCandidate,
    NoPathFound,
    OutOfReach,
    ParseError,
    PipelineError,
    ReachplanError,
    ScenarioError,
    StartInvalid,
    Stuck,
    SubdivisionExhausted,
)
from .guide import (
    GuideParams,
    ReachabilityChecker,
    RootPath,
    RootState,
    plan_root_path,
    reachability_check,
)
from .mesh import TriMesh, load_mesh, make_mesh, save_obj
from .pipeline import (
    BenchRow,
    PipelineResult,
    Scenario,
    bench,
    build_terrain,
    load_scenario,
    run_pipeline,
)
from .robot import (
    LIMB_ORDER,
    LimbModel,
    ReachabilityVolume,
    RobotModel,
    build_roms,
    default_robot,
    generate_rom,
    limb_fk,
    limb_ik,
    limb_jacobian,
    load_robot,
    static_torques,
)
from .sampledb import (
    LimbSample,
    SampleOctree,
    build_all_databases,
    build_sample_db,
    load_databases,
    query_contact_candidates,
    save_databases,
)
from .sceneio import export_scene, marker_count
from .terrain import generate_terrain, terrain_height
from .validator import (
    PlanReport,
    StepCheck,
    ValidatorParams,
    format_report,
    interpolate_swing,
    validate_plan,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
