"""Command-line simulator: run, sweep, campaign, and eq-demo subcommands.

Exit codes for ``run``: 0 on ReachedGoal, 2 on Collision, 3 on any other
terminal status, 1 on input errors.  ``sweep`` exits 0 only when every
non-excluded placement reaches the goal; ``campaign`` exits 0 only when all
runs reach their goals; ``eq-demo`` exits 0 when the stall and the broken
stall behave as expected.  Command-line flags override scenario-file values,
which override the built-in defaults.  NAV_THREADS caps the worker count of
sweep and campaign.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from .cbf import Obstacle, OverlappingObstaclesError
from .planning import GoalPosition, WorldPose
from .runner import (
    EXCLUDED,
    RunStatus,
    Scenario,
    campaign,
    liveness_sweep,
    run,
)
from .scenario_io import (
    ScenarioFormatError,
    load_scenario,
    write_campaign_summary,
    write_summary_json,
    write_sweep_csv,
    write_trajectory_csv,
)

#: Default sweep geometry: fixed start and goal with a unit obstacle placed
#: on a grid around the straight path.
DEFAULT_SWEEP_BASE = Scenario(
    start=WorldPose(-15.0, -15.0, math.radians(-15.0)),
    goal=GoalPosition(0.0, 0.0),
)

#: Built-in stall demonstration: robot, obstacle, and goal are collinear and
#: the robot faces both, so it walks straight at the obstacle and stops.
EQ_DEMO_SCENARIO = Scenario(
    start=WorldPose(-10.0, 0.0, 0.0),
    goal=GoalPosition(0.0, 0.0),
    obstacles=(Obstacle((-5.0, 0.0), 1.0),),
)


def _workers() -> int:
    limit = os.environ.get("NAV_THREADS")
    available = os.cpu_count() or 1
    if limit is not None:
        try:
            return max(1, min(int(limit), available))
        except ValueError:
            raise ScenarioFormatError(f"NAV_THREADS must be an integer, got {limit!r}")
    return available


def _apply_overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["rng_seed"] = args.seed
    if getattr(args, "integrator", None) is not None:
        updates["integrator"] = args.integrator
    if getattr(args, "epsilon", None) is not None:
        updates["epsilon_break"] = args.epsilon
    return replace(scenario, **updates) if updates else scenario


def _summary_path(out: Path) -> Path:
    return out.with_suffix(out.suffix + ".summary.json") if out.suffix != ".csv" else out.with_suffix(".summary.json")


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    record = run(scenario)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(record, out)
    write_summary_json(record, _summary_path(out))
    if record.status is RunStatus.REACHED_GOAL:
        return 0
    if record.status is RunStatus.COLLISION:
        return 2
    return 3


def _cmd_sweep(args: argparse.Namespace) -> int:
    if args.spacing <= 0.0:
        print(f"error: --spacing must be positive, got {args.spacing}", file=sys.stderr)
        return 1
    base = DEFAULT_SWEEP_BASE if args.scenario is None else load_scenario(args.scenario)
    base = _apply_overrides(replace(base, obstacles=()), args)
    cells = liveness_sweep(
        base,
        obstacle_radius=args.radius,
        spacing=args.spacing,
        workers=_workers(),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(cells, out)
    failures = [c for c in cells if c.status not in (RunStatus.REACHED_GOAL.value, EXCLUDED)]
    return 0 if not failures else 3


def _cmd_campaign(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = campaign(
        n_maps=args.maps,
        runs_per_map=args.runs,
        seed=args.seed if args.seed is not None else 0,
        noisy_maps="all" if args.noisy else "half",
        workers=_workers(),
    )
    write_campaign_summary(summary, out_dir / "summary.json")
    return 0 if summary.n_reached == summary.n_runs else 3


def _cmd_eq_demo(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = _apply_overrides(EQ_DEMO_SCENARIO, args)

    stalled = run(replace(scenario, break_equilibrium=False))
    write_trajectory_csv(stalled, out_dir / "eq_demo_stall.csv")
    write_summary_json(stalled, out_dir / "eq_demo_stall.summary.json")

    broken = run(replace(scenario, break_equilibrium=True))
    write_trajectory_csv(broken, out_dir / "eq_demo_break.csv")
    write_summary_json(broken, out_dir / "eq_demo_break.summary.json")

    ok = stalled.status is RunStatus.EQUILIBRIUM and broken.status is RunStatus.REACHED_GOAL
    return 0 if ok else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbfnav",
        description="Reactive obstacle-avoidance simulator with barrier-certified stepping.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario file")
    p_run.add_argument("--scenario", required=True, help="scenario JSON path")
    p_run.add_argument("--out", required=True, help="trajectory CSV path")
    p_run.add_argument("--seed", type=int, default=None, help="override runner seed")
    p_run.add_argument(
        "--integrator", choices=("kinematic", "alip"), default=None, help="override integrator"
    )
    p_run.add_argument("--epsilon", type=float, default=None, help="override stall-break bias")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="liveness sweep over obstacle placements")
    p_sweep.add_argument("--scenario", default=None, help="base scenario (obstacles ignored)")
    p_sweep.add_argument("--out", required=True, help="grid CSV path")
    p_sweep.add_argument("--spacing", type=float, default=1.0, help="grid spacing in meters")
    p_sweep.add_argument("--radius", type=float, default=1.0, help="swept obstacle radius")
    p_sweep.add_argument("--seed", type=int, default=None, help="override runner seed")
    p_sweep.add_argument(
        "--integrator", choices=("kinematic", "alip"), default=None, help="override integrator"
    )
    p_sweep.add_argument("--epsilon", type=float, default=None, help="override stall-break bias")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_camp = sub.add_parser("campaign", help="synthetic multi-obstacle study")
    p_camp.add_argument("--out", required=True, help="output directory")
    p_camp.add_argument("--maps", type=int, default=4, help="number of generated maps")
    p_camp.add_argument("--runs", type=int, default=6, help="runs per map")
    p_camp.add_argument(
        "--noisy", action="store_true", help="run all maps noisy (default: second half)"
    )
    p_camp.add_argument("--seed", type=int, default=None, help="campaign seed")
    p_camp.set_defaults(func=_cmd_campaign)

    p_eq = sub.add_parser("eq-demo", help="boundary stall with and without breaking")
    p_eq.add_argument("--out", required=True, help="output directory")
    p_eq.add_argument("--epsilon", type=float, default=None, help="override stall-break bias")
    p_eq.add_argument("--seed", type=int, default=None, help="override runner seed")
    p_eq.set_defaults(func=_cmd_eq_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioFormatError, OverlappingObstaclesError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
