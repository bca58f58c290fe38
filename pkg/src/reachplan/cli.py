"""Command-line front end.

Subcommands:

- ``plan <scenario>``: run the full pipeline and write plan, report, and
  scene into the scenario's output directory.
- ``validate <plan>``: re-validate a plan file in its recorded context.
- ``export <plan>``: write the viewer scene for a plan file.
- ``bench <suite> --repeats N``: run every scenario in a suite file N times
  with varied seeds and emit the benchmark CSV.
- ``gen-db <robot> --n N --cell S --seed K``: build and save the per-limb
  contact sample databases.

Exit code 0 on success; failures print a stage-labeled diagnostic and exit
nonzero (an invalid plan exits 1, operational errors exit 2).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .contacts import plan_from_json
from .errors import PipelineError, ReachplanError
from .pipeline import (
    Scenario,
    bench,
    context_from_meta,
    load_scenario,
    run_pipeline,
)
from .robot import default_robot, load_robot
from .sampledb import build_all_databases, save_databases
from .sceneio import export_scene
from .validator import format_report, validate_plan


def _fail(stage: str, exc: BaseException) -> int:
    print(f"error [{stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
    return 2


def _load_robot_arg(spec: str):
    if spec == "builtin":
        return default_robot()
    return load_robot(spec)


def cmd_plan(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ReachplanError as exc:
        return _fail("scenario", exc)
    try:
        result = run_pipeline(scenario)
    except PipelineError as exc:
        return _fail(exc.stage, exc.cause)
    row = result.row
    verdict = "VALID" if result.report.valid else "INVALID"
    print(f"{scenario.name}: {row.steps} steps, plan {verdict}")
    print(f"  affordance {row.affordance_ms:.1f} ms, guide {row.root_s:.2f} s, "
          f"contacts {row.contact_s:.2f} s")
    for kind, path in sorted(result.artifacts.items()):
        print(f"  {kind}: {path}")
    return 0


def _read_plan(path):
    text = Path(path).read_text(encoding="utf-8")
    return plan_from_json(text)


def cmd_validate(args) -> int:
    try:
        plan, meta = _read_plan(args.plan)
    except (OSError, ValueError, ReachplanError) as exc:
        return _fail("plan-file", exc)
    try:
        robot, mesh, _, vparams = context_from_meta(meta)
    except ReachplanError as exc:
        return _fail("context", exc)
    report = validate_plan(plan, robot, mesh, vparams)
    print(format_report(report))
    return 0 if report.valid else 1


def cmd_export(args) -> int:
    try:
        plan, meta = _read_plan(args.plan)
    except (OSError, ValueError, ReachplanError) as exc:
        return _fail("plan-file", exc)
    try:
        _, mesh, surfaces, _ = context_from_meta(meta)
    except ReachplanError as exc:
        return _fail("context", exc)
    out = args.out or str(Path(args.plan).with_name("scene.obj"))
    try:
        export_scene(out, mesh, surfaces, plan)
    except OSError as exc:
        return _fail("export", exc)
    print(out)
    return 0


def cmd_bench(args) -> int:
    suite_path = Path(args.suite)
    try:
        lines = suite_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        return _fail("suite", exc)
    scenarios: list[Scenario] = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            scenarios.append(load_scenario(suite_path.parent / line))
        except ReachplanError as exc:
            return _fail("scenario", exc)
    if not scenarios:
        return _fail("suite", ValueError("suite file lists no scenarios"))
    csv_text = bench(scenarios, args.repeats)
    out = args.out or str(suite_path.with_suffix(".csv"))
    Path(out).write_text(csv_text, encoding="utf-8")
    print(csv_text, end="")
    print(f"written: {out}", file=sys.stderr)
    return 0


def cmd_gen_db(args) -> int:
    try:
        robot = _load_robot_arg(args.robot)
    except ReachplanError as exc:
        return _fail("robot", exc)
    t0 = time.perf_counter()
    try:
        dbs = build_all_databases(robot, n=args.n, cell_size=args.cell,
                                  seed=args.seed)
    except ReachplanError as exc:
        return _fail("database", exc)
    dt = time.perf_counter() - t0
    out = args.out
    if out is None:
        stem = "builtin" if args.robot == "builtin" else Path(args.robot).stem
        out = f"{stem}.rpdb"
    save_databases(out, dbs)
    total = sum(db.n for db in dbs.values())
    print(f"{total} samples across {len(dbs)} limbs in {dt:.1f} s -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reachplan",
        description="contact planning for a parametric quadruped",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run the full pipeline on a scenario")
    p.add_argument("scenario", help="scenario INI file")
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("validate", help="re-validate a plan file")
    p.add_argument("plan", help="plan JSON file")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("export", help="write the viewer scene for a plan")
    p.add_argument("plan", help="plan JSON file")
    p.add_argument("--out", default=None, help="output OBJ path")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("bench", help="benchmark a suite of scenarios")
    p.add_argument("suite", help="text file listing scenario paths")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", default=None, help="output CSV path")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("gen-db", help="build contact sample databases")
    p.add_argument("robot", help="robot INI file, or 'builtin'")
    p.add_argument("--n", type=int, default=50000, help="samples per limb")
    p.add_argument("--cell", type=float, default=0.01, help="cell size (m)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output database path")
    p.set_defaults(fn=cmd_gen_db)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ReachplanError as exc:
        return _fail("internal", exc)


if __name__ == "__main__":
    sys.exit(main())
