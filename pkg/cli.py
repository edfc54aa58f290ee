"""
cli.py - command line surface: simulate, screen, ensemble, score, delta.

Usage:
  python cli.py simulate --pathway BAU --out out/bau_run
  python cli.py screen --pathway BAU --out out/bau_screen
  python cli.py ensemble --pathway GreenRecovery --n 10000 --seed 7 --workers 8 --out out/green
  python cli.py score --ensemble out/bau out/green --ambition moderate --milestone 2030 --out out/score
  python cli.py delta --ref out/bau --alt out/green --out out/delta

Exit codes: 0 success, 2 input/validation error, 3 runtime/numeric error.
"""

from __future__ import annotations

import argparse
from dataclasses import replace
import logging
from pathlib import Path
import sys
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

from engine import TimeGrid, run, write_trajectory_csv
from ensemble import (
    DEFAULT_KEEP,
    DEFAULT_LEVELS,
    DEFAULT_SCREEN_OUTPUT,
    DEFAULT_TRAJECTORIES,
    MILESTONES,
    load_ensemble,
    run_ensemble,
    screen,
    screen_then_range,
)
from errors import EXIT_OK, InputError, SimulationError, exit_code_for
from outputs import RunManifest, input_digests, staged_output
from scenarios import (
    PATHWAY_FILES,
    PathwaySpec,
    apply_pathway,
    candidate_ranges,
    load_ranges,
    pathway_path,
    resolve_pathway,
)
from sdg import (
    AMBITIONS,
    ENTRY_POINTS,
    catalog_variables,
    check_catalog_targets,
    deltas_frame,
    load_catalog,
    load_targets,
    report_frames,
    score_ensemble,
    systems_change_table,
)
from sectors import CONTROL_VARIABLES, WORLD_OUTPUTS, ParameterRegistry, compile_world, load_registry
import settings


logger = logging.getLogger("worldpath")

DEFAULT_REALIZATIONS = 10_000
DEFAULT_MILESTONE = 2030
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _csv_list(text: str) -> List[str]:
    return [item.strip() for item in str(text).split(",") if item.strip()]


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in _csv_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated years, got '{text}'") from exc


def _pathway_file(ref: str) -> Path:
    return pathway_path(ref) if ref in PATHWAY_FILES else Path(ref)


def _load_inputs(args: argparse.Namespace) -> Tuple[ParameterRegistry, PathwaySpec, Dict[str, str]]:
    registry = load_registry(args.registry)
    spec = resolve_pathway(args.pathway, registry)
    paths: List[Path] = [_pathway_file(args.pathway), Path(registry.source or settings.REGISTRY_JSON)]
    paths.append(settings.DATA_DIR / "forcing")
    return registry, spec, input_digests(paths)


def _manifest(subcommand: str, inputs: Dict[str, str], started: float, **fields: Any) -> RunManifest:
    return RunManifest(subcommand=subcommand, inputs=inputs, wall_clock_s=round(time.perf_counter() - started, 3), **fields)


# ---------- Subcommands ----------
def cmd_simulate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    registry, spec, inputs = _load_inputs(args)
    grid = TimeGrid(end=float(args.end))
    model = compile_world(apply_pathway(registry.nominal_set(), spec))
    trajectory = run(model, grid, record=list(WORLD_OUTPUTS))
    with staged_output(args.out) as stage:
        write_trajectory_csv(trajectory, stage.path("trajectory.csv"))
        stage.write_csv("controls.csv", trajectory.to_frame(CONTROL_VARIABLES))
        details = {"pathway": spec.id, "label": spec.label, "grid": [grid.start, grid.end, grid.step]}
        stage.commit(_manifest("simulate", inputs, started, details=details))
    logger.info("Simulated %s (%s) %g-%g", spec.id, spec.label, grid.start, grid.end)
    return EXIT_OK


def cmd_screen(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    registry, spec, inputs = _load_inputs(args)
    if args.ranges:
        spec = replace(spec, uncertainty=load_ranges(args.ranges, registry))
        inputs.update(input_digests([args.ranges]))
    result, ranges = screen(
        registry, spec, output=args.output, year=args.year, r=args.trajectories, p=args.levels, seed=args.seed
    )
    with staged_output(args.out) as stage:
        stage.write_csv("morris.csv", result.to_frame())
        details = {
            "pathway": spec.id,
            "output": args.output,
            "year": args.year,
            "trajectories": args.trajectories,
            "levels": args.levels,
            "ranges": [rg.to_dict() for rg in ranges],
        }
        stage.commit(_manifest("screen", inputs, started, seed=args.seed, details=details))
    for rank, name in enumerate(result.ranked()[: args.show], start=1):
        print(f"{rank:>3}  {name}")
    return EXIT_OK


def cmd_ensemble(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    registry, spec, inputs = _load_inputs(args)
    if args.ranges:
        spec = replace(spec, uncertainty=load_ranges(args.ranges, registry))
        inputs.update(input_digests([args.ranges]))
    grid = TimeGrid()

    if args.no_screen:
        ranges = candidate_ranges(registry, spec)
    else:
        ranges = screen_then_range(
            registry,
            spec,
            args.screen_k,
            output=args.screen_output,
            r=args.screen_trajectories,
            p=args.screen_levels,
            seed=args.seed,
            grid=grid,
        )

    catalog = load_catalog(args.catalog, variables=WORLD_OUTPUTS)
    inputs.update(input_digests([args.catalog]))
    retain = sorted(set(catalog_variables(catalog)) | set(ENTRY_POINTS))
    result = run_ensemble(
        compile_world,
        spec,
        args.n,
        args.seed,
        args.workers,
        base=registry.nominal_set(),
        ranges=ranges,
        grid=grid,
        record=list(WORLD_OUTPUTS),
        retain=retain,
    )

    with staged_output(args.out) as stage:
        result.write(stage)
        if args.charts:
            from charts import write_envelope_charts

            write_envelope_charts(stage, [result], _csv_list(args.charts) if args.charts != "default" else CONTROL_VARIABLES)
        details = {
            "pathway": spec.id,
            "label": spec.label,
            "chunk_size": result.chunk_size,
            "screened": not args.no_screen,
            "screen_k": None if args.no_screen else args.screen_k,
            "ranges": [rg.to_dict() for rg in ranges],
            "retain_years": list(result.retain_years),
            "grid": [grid.start, grid.end, grid.step],
        }
        stage.commit(_manifest("ensemble", inputs, started, seed=args.seed, n=result.n, workers=args.workers, details=details))
    logger.info("Ensemble %s finished: %d realizations", spec.id, result.n)
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    catalog = load_catalog(args.catalog)
    targets = load_targets(args.targets)
    check_catalog_targets(catalog, targets)
    counts = targets.basis_counts()

    ambitions = AMBITIONS if args.ambition == "all" else (args.ambition,)
    ensembles = [load_ensemble(directory) for directory in args.ensemble]
    reports = [score_ensemble(ens, catalog, targets, ambition, args.milestone) for ens in ensembles for ambition in ambitions]
    progress, goals, shares = report_frames(reports)

    inputs = input_digests([*args.ensemble, args.catalog, args.targets])
    with staged_output(args.out) as stage:
        stage.write_json("progress.json", [report.to_dict() for report in reports])
        stage.write_csv("progress.csv", progress)
        stage.write_csv("goals.csv", goals)
        stage.write_csv("level_shares.csv", shares)
        if args.pdf:
            from scorecards import generate_scorecards_pdf, load_scorecard_layout

            generate_scorecards_pdf(reports, stage.path("scorecards.pdf"), layout=load_scorecard_layout())
        details = {
            "ambitions": list(ambitions),
            "milestone": args.milestone,
            "pathways": [ens.pathway for ens in ensembles],
            "basis_counts": counts,
        }
        stage.commit(_manifest("score", inputs, started, n=sum(ens.n for ens in ensembles), details=details))

    for report in reports:
        for goal in report.goals:
            share = goal.shares[goal.level]
            print(
                f"{report.pathway:<16} {report.milestone} {report.ambition:<9} {goal.goal:<6} "
                f"index {goal.mean:6.1f}  {goal.level.label} ({share:.0%})"
            )
    return EXIT_OK


def cmd_delta(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    ref = load_ensemble(args.ref)
    alt = load_ensemble(args.alt)
    variables = _csv_list(args.vars) if args.vars else list(ENTRY_POINTS)
    deltas = systems_change_table(ref, alt, variables, args.years, sigma=args.sigma)

    inputs = input_digests([args.ref, args.alt])
    with staged_output(args.out) as stage:
        stage.write_csv("systems_change.csv", deltas_frame(deltas))
        details = {"reference": ref.pathway, "alternative": alt.pathway, "sigma": args.sigma, "years": list(args.years)}
        stage.commit(_manifest("delta", inputs, started, details=details))

    print(f"{alt.pathway} relative to {ref.pathway}:")
    for d in deltas:
        print(f"  {d.entry_point:<10} {d.variable:<30} {d.year}: {d.format()}")
    return EXIT_OK


# ---------- Parser ----------
def _add_pathway_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pathway", required=True, help=f"Pathway id ({', '.join(PATHWAY_FILES)}) or pathway JSON file")
    p.add_argument("--registry", default=str(settings.REGISTRY_JSON), help="Parameter registry JSON")
    p.add_argument("--out", required=True, help="Output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="worldpath", description="Global pathway simulation, ensembles and SDG scoring.")
    parser.add_argument("--log-level", default=settings.log_level(), help="DEBUG, INFO, WARNING or ERROR (env WORLDPATH_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Deterministic run of one pathway at nominal parameters")
    _add_pathway_args(p)
    p.add_argument("--end", type=int, default=2100, help="Last simulated year (start is 2015)")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("screen", help="Morris screening of a pathway's uncertain parameters")
    _add_pathway_args(p)
    p.add_argument("--ranges", help="Range file replacing the pathway's uncertainty ranges")
    p.add_argument("--output", default=DEFAULT_SCREEN_OUTPUT, help="Screened output variable")
    p.add_argument("--year", type=int, default=2100, help="Year of the screened output")
    p.add_argument("--trajectories", type=int, default=DEFAULT_TRAJECTORIES, help="Morris trajectories r")
    p.add_argument("--levels", type=int, default=DEFAULT_LEVELS, help="Morris grid levels p (even)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--show", type=int, default=DEFAULT_KEEP, help="Ranked parameters printed")
    p.set_defaults(handler=cmd_screen)

    p = sub.add_parser("ensemble", help="LHS ensemble of one pathway")
    _add_pathway_args(p)
    p.add_argument("--n", type=int, default=DEFAULT_REALIZATIONS, help="Realizations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=settings.default_workers(), help="Parallel workers (env WORLDPATH_WORKERS)")
    p.add_argument("--screen-k", type=int, default=DEFAULT_KEEP, help="Parameters kept after screening")
    p.add_argument("--screen-output", default=DEFAULT_SCREEN_OUTPUT, help="Output variable screened at 2100")
    p.add_argument("--screen-trajectories", type=int, default=DEFAULT_TRAJECTORIES)
    p.add_argument("--screen-levels", type=int, default=DEFAULT_LEVELS)
    p.add_argument("--no-screen", action="store_true", help="Sample every candidate range without screening")
    p.add_argument("--ranges", help="Range file replacing the pathway's uncertainty ranges")
    p.add_argument("--catalog", default=str(settings.INDICATORS_JSON), help="Indicator catalog naming retained variables")
    p.add_argument("--charts", nargs="?", const="default", help="Write SVG envelope charts (optional comma list of variables)")
    p.set_defaults(handler=cmd_ensemble)

    p = sub.add_parser("score", help="SDG progress of one or more ensembles")
    p.add_argument("--ensemble", nargs="+", required=True, help="Ensemble directories")
    p.add_argument("--catalog", default=str(settings.INDICATORS_JSON), help="Indicator catalog JSON")
    p.add_argument("--targets", default=str(settings.TARGETS_JSON), help="Target set JSON")
    p.add_argument("--ambition", default="moderate", choices=[*AMBITIONS, "all"])
    p.add_argument("--milestone", type=int, default=DEFAULT_MILESTONE, help=f"One of {', '.join(map(str, MILESTONES))}")
    p.add_argument("--pdf", action="store_true", help="Also write printable goal scorecards")
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(handler=cmd_score)

    p = sub.add_parser("delta", help="Systems-change deltas of an alternative against a reference ensemble")
    p.add_argument("--ref", required=True, help="Reference ensemble directory")
    p.add_argument("--alt", required=True, help="Alternative ensemble directory")
    p.add_argument("--vars", help="Comma-separated variables (default: the eight entry-point variables)")
    p.add_argument("--years", type=_int_list, default=list(MILESTONES), help="Comma-separated years")
    p.add_argument("--sigma", default="alt", choices=["alt", "pooled"], help="Band from the alternative or pooled sigma")
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(handler=cmd_delta)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO), format=LOG_FORMAT)
    try:
        return int(args.handler(args))
    except (InputError, SimulationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    raise SystemExit(main())
