"""Scenario files and end-to-end pipeline orchestration.

A scenario is a single INI file that fully determines a run: terrain (a
generator spec or a mesh path), robot description, start and goal, and the
parameter blocks for every stage. Unknown sections or keys are rejected so a
typo cannot silently fall back to a default.

``run_pipeline`` executes surface extraction, guide-path planning, contact
planning, and validation in order, timing each stage, and writes the plan,
the validation report, and a viewer scene to the output directory. Any stage
failure is re-raised as PipelineError carrying the stage label.

Reachability volumes and sample databases depend only on the robot, not on
the scenario, so they are memoized per robot hash within the process (the
database seed is fixed: plans stay byte-reproducible from scenario + seed
alone).
"""

from __future__ import annotations

import configparser
import csv
import io
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .affordance import AffordanceParams, extract_affordances
from .contacts import (
    ContactPlan,
    PlannerParams,
    initial_stance,
    plan_contacts,
    plan_to_json,
)
from .errors import PipelineError, ReachplanError, ScenarioError
from .guide import GuideParams, RootState, plan_root_path
from .mesh import TriMesh, load_mesh
from .pipeline_cache import get_databases, get_roms
from .robot import RobotModel, default_robot, load_robot
from .sceneio import export_scene
from .terrain import generate_terrain, terrain_height
from .validator import PlanReport, ValidatorParams, format_report, validate_plan

DB_SEED = 0
DB_WEIGHTS = (1.0, 1.0, 1.0)


@dataclass
class Scenario:
    name: str
    seed: int
    terrain: dict  # {"kind": ..., params...} or {"kind": "mesh", "path": ...}
    robot_file: str | None
    start: dict  # x, y, yaw, optional z
    goal: dict
    affordance: AffordanceParams = field(default_factory=AffordanceParams)
    guide: GuideParams = field(default_factory=GuideParams)
    contacts: PlannerParams = field(default_factory=PlannerParams)
    validator: ValidatorParams = field(default_factory=ValidatorParams)
    db_n: int = 20000
    db_cell: float = 0.02
    out_dir: str = ""
    base_dir: str = "."


@dataclass
class BenchRow:
    environment: str
    affordance_ms: float
    root_s: float
    contact_s: float
    steps: int
    validator_success: bool

    def __post_init__(self):
        if min(self.affordance_ms, self.root_s, self.contact_s) < 0:
            raise ValueError("stage times must be non-negative")
        if self.steps < 0:
            raise ValueError("step count must be non-negative")


@dataclass
class PipelineResult:
    plan: ContactPlan
    report: PlanReport
    row: BenchRow
    mesh: TriMesh
    surfaces: list
    artifacts: dict


_SCHEMA = {
    "run": {"name", "seed", "out"},
    "terrain": {"type", "path", "length", "width", "cell", "obstacles",
                "obstacle_height", "obstacle_depth", "gap", "levels", "rise",
                "run", "pad", "pitch", "plank_min", "plank_max", "tilt_deg",
                "z_var"},
    "robot": {"file"},
    "start": {"x", "y", "z", "yaw"},
    "goal": {"x", "y", "z", "yaw"},
    "affordance": {"theta_max_deg", "a_min", "edge_margin"},
    "guide": {"v_max", "a_max", "rrt_max_iters", "goal_bias", "delta_check",
              "eta", "shortcut_attempts", "blend_len"},
    "contacts": {"delta", "dt_ref", "w_offline", "w_online", "max_candidates",
                 "max_subdivision"},
    "validator": {"margin_min", "n_points", "swing_height"},
    "database": {"n", "cell"},
}

_INT_KEYS = {"seed", "rrt_max_iters", "shortcut_attempts", "max_candidates",
             "max_subdivision", "n_points", "n"}


def _coerce(key, value):
    try:
        if key in _INT_KEYS:
            return int(value)
        return float(value)
    except ValueError as exc:
        raise ScenarioError(f"bad value for {key}: {value!r}") from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None,
                                   inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ScenarioError(f"cannot parse {path.name}: {exc}") from exc

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ScenarioError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ScenarioError(f"unknown key {key!r} in [{section}]")

    def section(name):
        return dict(cp[name]) if cp.has_section(name) else {}

    run = section("run")
    name = run.get("name", path.stem)
    seed = int(run.get("seed", "0"))
    out = run.get("out", f"{path.stem}_out")

    terr = section("terrain")
    kind = terr.pop("type", None)
    if kind is None:
        raise ScenarioError("terrain section must declare a type")
    terrain: dict = {"kind": kind}
    if kind == "mesh":
        if "path" not in terr:
            raise ScenarioError("terrain type mesh requires a path")
        terrain["path"] = terr.pop("path")
        if terr:
            raise ScenarioError(f"mesh terrain takes no extra keys: {sorted(terr)}")
    else:
        if "path" in terr:
            raise ScenarioError("path is only valid for terrain type mesh")
        terrain.update({k: _coerce(k, v) for k, v in terr.items()})

    robot_file = section("robot").get("file")

    def pose(sec_name, required=True):
        sec = section(sec_name)
        if not sec:
            if required:
                raise ScenarioError(f"missing [{sec_name}] section")
            return {}
        if "x" not in sec or "y" not in sec:
            raise ScenarioError(f"[{sec_name}] needs at least x and y")
        return {k: float(v) for k, v in sec.items()}

    def params(cls, sec_name, **extra):
        sec = {k: _coerce(k, v) for k, v in section(sec_name).items()}
        sec.update(extra)
        if sec_name == "affordance" and "theta_max_deg" in sec:
            sec["theta_max"] = np.radians(sec.pop("theta_max_deg"))
        try:
            return cls(**sec)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"invalid [{sec_name}] parameters: {exc}") from exc

    db = {k: _coerce(k, v) for k, v in section("database").items()}

    return Scenario(
        name=name,
        seed=seed,
        terrain=terrain,
        robot_file=robot_file,
        start=pose("start"),
        goal=pose("goal"),
        affordance=params(AffordanceParams, "affordance"),
        guide=params(GuideParams, "guide", seed=seed),
        contacts=params(PlannerParams, "contacts"),
        validator=params(ValidatorParams, "validator"),
        db_n=int(db.get("n", 20000)),
        db_cell=float(db.get("cell", 0.02)),
        out_dir=out,
        base_dir=str(path.parent),
    )


def build_robot(scenario: Scenario) -> RobotModel:
    if scenario.robot_file:
        return load_robot(Path(scenario.base_dir) / scenario.robot_file)
    return default_robot()


def build_terrain(terrain: dict, seed: int, base_dir=".") -> TriMesh:
    kind = terrain["kind"]
    if kind == "mesh":
        return load_mesh(Path(base_dir) / terrain["path"])
    dims = {k: v for k, v in terrain.items() if k != "kind"}
    return generate_terrain(kind, seed=seed, **dims)


def _resolve_state(pose: dict, mesh: TriMesh, robot: RobotModel) -> RootState:
    x, y = pose["x"], pose["y"]
    yaw = pose.get("yaw", 0.0)
    if "z" in pose:
        z = pose["z"]
    else:
        z = terrain_height(mesh, x, y) + robot.standing_height
    return RootState(np.array([x, y, z]), yaw)


def _stage(name, fn, *args, **kwargs):
    t0 = time.perf_counter()
    try:
        out = fn(*args, **kwargs)
    except ReachplanError as exc:
        raise PipelineError(name, exc) from exc
    return out, time.perf_counter() - t0


def run_pipeline(scenario: Scenario, write_artifacts: bool = True) -> PipelineResult:
    mesh, _ = _stage("terrain", build_terrain, scenario.terrain, scenario.seed,
                     scenario.base_dir)
    robot = build_robot(scenario)

    surfaces, dt_aff = _stage("affordance", extract_affordances, mesh,
                              scenario.affordance)
    if not surfaces:
        raise PipelineError("affordance", ScenarioError("no contact surfaces found"))

    roms = get_roms(robot)
    dbs = get_databases(robot, scenario.db_n, scenario.db_cell, DB_WEIGHTS, DB_SEED)

    start = _resolve_state(scenario.start, mesh, robot)
    goal = _resolve_state(scenario.goal, mesh, robot)

    path, dt_root = _stage("guide", plan_root_path, mesh, surfaces, start, goal,
                           robot, scenario.guide, roms=roms)

    def _contacts():
        stance0 = initial_stance(robot, start, surfaces, mesh.tri_verts)
        return plan_contacts(path, stance0, robot, dbs, mesh, surfaces,
                             scenario.contacts)

    plan, dt_contact = _stage("contacts", _contacts)

    report, _ = _stage("validate", validate_plan, plan, robot, mesh,
                       scenario.validator)

    row = BenchRow(
        environment=scenario.name,
        affordance_ms=dt_aff * 1e3,
        root_s=dt_root,
        contact_s=dt_contact,
        steps=plan.n_steps,
        validator_success=report.valid,
    )

    artifacts = {}
    if write_artifacts:
        out_dir = Path(scenario.base_dir) / scenario.out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        meta = plan_meta(scenario, robot)
        plan_path = out_dir / "plan.json"
        plan_path.write_text(plan_to_json(plan, meta), encoding="utf-8")
        report_path = out_dir / "report.txt"
        report_path.write_text(format_report(report) + "\n", encoding="utf-8")
        scene_path = out_dir / "scene.obj"
        export_scene(scene_path, mesh, surfaces, plan, root_path=path)
        artifacts = {"plan": str(plan_path), "report": str(report_path),
                     "scene": str(scene_path)}

    return PipelineResult(plan, report, row, mesh, surfaces, artifacts)


def plan_meta(scenario: Scenario, robot: RobotModel) -> dict:
    """Everything needed to re-create the validation context of a plan."""
    return {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "terrain": dict(scenario.terrain),
        "robot": scenario.robot_file or "builtin",
        "base_dir": scenario.base_dir,
        "robot_hash": robot.hash(),
        "affordance": {
            "theta_max": scenario.affordance.theta_max,
            "a_min": scenario.affordance.a_min,
            "edge_margin": scenario.affordance.edge_margin,
        },
        "validator": {
            "margin_min": scenario.validator.margin_min,
            "n_points": scenario.validator.n_points,
            "swing_height": scenario.validator.swing_height,
        },
    }


def context_from_meta(meta: dict):
    """Rebuild (robot, mesh, surfaces, validator params) from plan metadata."""
    base = meta.get("base_dir", ".")
    if meta.get("robot", "builtin") == "builtin":
        robot = default_robot()
    else:
        robot = load_robot(Path(base) / meta["robot"])
    if meta.get("robot_hash") and robot.hash() != meta["robot_hash"]:
        raise ScenarioError("robot description changed since the plan was made")
    mesh = build_terrain(meta["terrain"], int(meta.get("seed", 0)), base)
    aff = meta.get("affordance", {})
    surfaces = extract_affordances(mesh, AffordanceParams(**aff)) if aff else []
    v = meta.get("validator", {})
    vparams = ValidatorParams(**v) if v else ValidatorParams()
    return robot, mesh, surfaces, vparams


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("env", "affordance_ms", "root_s", "contact_s", "steps",
               "successes", "repeats")


def bench_scenario(scenario: Scenario, repeats: int) -> list:
    """Run a scenario `repeats` times with seeds seed, seed+1, ... Failed
    runs count as unsuccessful rows with zero steps."""
    rows = []
    for i in range(repeats):
        s_i = replace(scenario, seed=scenario.seed + i,
                      guide=replace(scenario.guide, seed=scenario.seed + i))
        try:
            result = run_pipeline(s_i, write_artifacts=False)
            rows.append(result.row)
        except (ReachplanError, PipelineError):
            rows.append(BenchRow(scenario.name, 0.0, 0.0, 0.0, 0, False))
    return rows


def bench(scenarios, repeats: int) -> str:
    """CSV with one aggregated row per scenario: mean stage times, mean step
    count, success count out of `repeats`."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for scenario in scenarios:
        rows = bench_scenario(scenario, repeats)
        writer.writerow([
            scenario.name,
            f"{np.mean([r.affordance_ms for r in rows]):.3f}",
            f"{np.mean([r.root_s for r in rows]):.4f}",
            f"{np.mean([r.contact_s for r in rows]):.4f}",
            f"{np.mean([r.steps for r in rows]):.2f}",
            sum(1 for r in rows if r.validator_success),
            repeats,
        ])
    return buf.getvalue()
