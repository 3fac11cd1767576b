"""Command-line interface.

Subcommands read scenario files and write result documents (canonical
JSON) to --out or stdout. Exit codes: 0 success, 1 validation/parse error,
2 infeasibility.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import allocation, report, scheduler, search, simulator, store, strategy as strategy_mod
from .errors import (
    FieldOpsError,
    InfeasibleStrategyError,
    ParseError,
    SizeGuardError,
    ValidationError,
    VersionError,
)
from .serialize import canonical_json, schedule_to_doc, violation_to_doc, world_digest

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2


def _write(doc, out: str | None) -> None:
    text = canonical_json(doc)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def _load(path: str) -> store.ScenarioDocument:
    return store.load_scenario_file(path)


def cmd_validate(args) -> int:
    try:
        scenario = _load(args.scenario)
    except ValidationError as exc:
        _write(
            {"valid": False, "violations": [violation_to_doc(v) for v in exc.violations]},
            args.out,
        )
        print(f"validation failed: {len(exc.violations)} violation(s)", file=sys.stderr)
        return EXIT_VALIDATION
    _write({"valid": True, "violations": [], "world_digest": world_digest(scenario.world)}, args.out)
    return EXIT_OK


def cmd_plan(args) -> int:
    scenario = _load(args.scenario)
    strat = scenario.strategy(args.strategy)
    choices = strategy_mod.enumerate_choices(scenario.world, strat, args.cap)
    _write(
        {
            "strategy": strat.id,
            "world_digest": world_digest(scenario.world),
            "choices": choices.to_doc(),
        },
        args.out,
    )
    return EXIT_OK


def cmd_schedule(args) -> int:
    scenario = _load(args.scenario)
    strat = scenario.strategy(args.strategy)
    choices = strategy_mod.enumerate_choices(scenario.world, strat, args.cap)
    if args.choice >= len(choices.decisions):
        print(
            f"choice index {args.choice} out of range ({len(choices.decisions)} available)",
            file=sys.stderr,
        )
        return EXIT_VALIDATION
    decision = choices.decisions[args.choice]
    world = strategy_mod.apply_choice(scenario.world, decision)
    schedule = scheduler.build_schedule(world, strat, decision)
    _write(schedule_to_doc(schedule), args.out)
    return EXIT_OK


def cmd_search(args) -> int:
    scenario = _load(args.scenario)
    strat = scenario.strategy(args.strategy)
    budget = None if args.budget in (None, 0) else args.budget
    plan = search.optimal_plan(scenario.world, strat, budget)
    _write(plan.to_doc(), args.out)
    return EXIT_OK


def cmd_allocate(args) -> int:
    scenario = _load(args.scenario)
    strat = scenario.strategy(args.strategy) if args.strategy else None
    result = allocation.allocate_refuges(scenario.world, args.speed, strat)
    _write(result.to_doc(), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = _load(args.scenario)
    strat = scenario.strategy(args.strategy)
    config = simulator.SimConfig(tick=args.tick, stop_at=args.until, seed=args.seed)
    trace = simulator.run(scenario.world, strat, config, choice_cap=args.cap)
    _write(store.trace_to_doc(trace), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    scenario = _load(args.scenario)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = {
        "map": str(report.render_map(scenario.world, outdir / "map.png")),
        "regions_csv": str(report.write_regions_csv(scenario.world, outdir / "regions.csv")),
    }
    if scenario.strategies:
        strat = scenario.strategy(args.strategy)
        choices = strategy_mod.enumerate_choices(scenario.world, strat, args.cap)
        decision = choices.decisions[0]
        world = strategy_mod.apply_choice(scenario.world, decision)
        schedule = scheduler.build_schedule(world, strat, decision)
        if schedule.entries:
            written["timeline"] = str(
                report.render_timeline(schedule, outdir / "timeline.png")
            )
        written["schedule_csv"] = str(
            report.write_schedule_csv(schedule, outdir / "schedule.csv")
        )
        written["makespan"] = schedule.makespan
    _write(written, args.out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    scenario = _load(args.scenario) if args.scenario else None
    app = create_app(scenario)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldops",
        description="Geospatial coordination engine: plan, schedule, search, allocate, simulate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_arg(p):
        p.add_argument("scenario", help="scenario file (canonical JSON)")
        p.add_argument("-o", "--out", default=None, help="write the result document here")

    p = sub.add_parser("validate", help="check a scenario against all model invariants")
    scenario_arg(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plan", help="enumerate ranked strategic choices")
    scenario_arg(p)
    p.add_argument("--strategy", default=None, help="strategy id (default: first)")
    p.add_argument("--cap", type=int, default=20)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("schedule", help="build the schedule for a ranked choice")
    scenario_arg(p)
    p.add_argument("--strategy", default=None)
    p.add_argument("--cap", type=int, default=20)
    p.add_argument("--choice", type=int, default=0, help="rank of the choice to commit")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("search", help="branch-and-bound for the optimal plan")
    scenario_arg(p)
    p.add_argument("--strategy", default=None)
    p.add_argument("--budget", type=int, default=0, help="node budget (0 = exhaustive)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("allocate", help="match casualty clusters to refuges")
    scenario_arg(p)
    p.add_argument("--speed", type=float, required=True, help="transport speed m/s")
    p.add_argument("--strategy", default=None, help="filter clusters by this strategy")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", help="closed-loop run with automatic re-planning")
    scenario_arg(p)
    p.add_argument("--strategy", default=None)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--until", type=float, default=None, help="stop at this time")
    group.add_argument("--quiescence", action="store_true", help="run until no work remains")
    p.add_argument("--tick", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=20)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="render map/timeline figures and CSV summaries")
    scenario_arg(p)
    p.add_argument("--outdir", required=True, help="directory for figures and CSVs")
    p.add_argument("--strategy", default=None)
    p.add_argument("--cap", type=int, default=20)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("scenario", nargs="?", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParseError, VersionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InfeasibleStrategyError, SizeGuardError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FieldOpsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entrypoint() -> None:
    sys.exit(main())
