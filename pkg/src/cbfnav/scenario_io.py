"""Scenario files, trajectory CSVs, and summary JSON documents.

A scenario is a single JSON document with sections ``start``, ``goal``,
``obstacles``, ``params`` (sub-sections ``clf``, ``qp``, ``alip``), and
``runner``.  Every field beyond start and goal is optional and falls back
to the library defaults; unknown keys are rejected with the offending JSON
path so typos cannot silently change a run.

Trajectory CSVs carry one row per control step with a fixed header.  Floats
are written with shortest round-trip formatting (Python ``repr``), so files
are diffable and re-reading reproduces the logged values exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

from .alip import AlipParams
from .cbf import Obstacle
from .clf import ClfParams
from .planning import GoalPosition, WorldPose
from .qp import QpWeights
from .runner import (
    CampaignSummary,
    Scenario,
    SweepCell,
    TrajectoryRecord,
)

SCENARIO_VERSION = 1

TRAJECTORY_COLUMNS = (
    "t",
    "x_r",
    "y_r",
    "theta",
    "r",
    "delta",
    "v_x",
    "v_y",
    "omega",
    "s",
    "lambda1",
    "lambda2",
    "case",
    "B_M",
    "V",
    "goal_x",
    "goal_y",
)


class ScenarioFormatError(ValueError):
    """A scenario document violates the schema; the message carries the path."""


def _require_mapping(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioFormatError(f"{path}: expected an object, got {type(value).__name__}")
    return value


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioFormatError(f"{path}: unknown key(s) {', '.join(unknown)}")


def _number(obj: dict, key: str, path: str, default: float | None = None) -> float:
    if key not in obj:
        if default is None:
            raise ScenarioFormatError(f"{path}.{key}: required")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioFormatError(f"{path}.{key}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioFormatError(f"{path}.{key}: must be finite, got {value!r}")
    return float(value)


def _integer(obj: dict, key: str, path: str, default: int) -> int:
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioFormatError(f"{path}.{key}: expected an integer, got {value!r}")
    return value


def _boolean(obj: dict, key: str, path: str, default: bool) -> bool:
    if key not in obj:
        return default
    value = obj[key]
    if not isinstance(value, bool):
        raise ScenarioFormatError(f"{path}.{key}: expected a boolean, got {value!r}")
    return value


def _parse_obstacle(value: Any, path: str) -> Obstacle:
    obj = _require_mapping(value, path)
    _check_keys(obj, {"center", "radius", "q"}, path)
    center = obj.get("center")
    if (
        not isinstance(center, list)
        or len(center) != 2
        or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in center)
    ):
        raise ScenarioFormatError(f"{path}.center: expected [x, y]")
    radius = _number(obj, "radius", path)
    q = None
    if "q" in obj:
        raw = obj["q"]
        ok = (
            isinstance(raw, list)
            and len(raw) == 2
            and all(isinstance(row, list) and len(row) == 2 for row in raw)
        )
        if not ok:
            raise ScenarioFormatError(f"{path}.q: expected a 2x2 matrix as nested lists")
        q = [[float(raw[i][j]) for j in range(2)] for i in range(2)]
    try:
        return Obstacle((float(center[0]), float(center[1])), radius, q)
    except ValueError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc


def parse_scenario(document: dict) -> Scenario:
    """Build a Scenario from a parsed JSON document, validating strictly."""
    root = _require_mapping(document, "$")
    _check_keys(root, {"version", "start", "goal", "obstacles", "params", "runner"}, "$")

    version = _integer(root, "version", "$", SCENARIO_VERSION)
    if version != SCENARIO_VERSION:
        raise ScenarioFormatError(f"$.version: unsupported version {version}")

    start_obj = _require_mapping(root.get("start"), "$.start")
    _check_keys(start_obj, {"x", "y", "theta"}, "$.start")
    start = WorldPose(
        _number(start_obj, "x", "$.start"),
        _number(start_obj, "y", "$.start"),
        _number(start_obj, "theta", "$.start", 0.0),
    )

    goal_obj = _require_mapping(root.get("goal"), "$.goal")
    _check_keys(goal_obj, {"x", "y"}, "$.goal")
    goal = GoalPosition(_number(goal_obj, "x", "$.goal"), _number(goal_obj, "y", "$.goal"))

    obstacles = []
    raw_obstacles = root.get("obstacles", [])
    if not isinstance(raw_obstacles, list):
        raise ScenarioFormatError("$.obstacles: expected a list")
    for i, raw in enumerate(raw_obstacles):
        obstacles.append(_parse_obstacle(raw, f"$.obstacles[{i}]"))

    params = _require_mapping(root.get("params", {}), "$.params")
    _check_keys(params, {"clf", "qp", "alip"}, "$.params")

    clf_obj = _require_mapping(params.get("clf", {}), "$.params.clf")
    _check_keys(
        clf_obj,
        {"gamma", "beta", "alpha", "k_r1", "k_r2", "k_d1", "k_d2", "omega_gamma_squared"},
        "$.params.clf",
    )
    defaults = ClfParams()
    try:
        clf = ClfParams(
            gamma=_number(clf_obj, "gamma", "$.params.clf", defaults.gamma),
            beta=_number(clf_obj, "beta", "$.params.clf", defaults.beta),
            alpha=_number(clf_obj, "alpha", "$.params.clf", defaults.alpha),
            k_r1=_number(clf_obj, "k_r1", "$.params.clf", defaults.k_r1),
            k_r2=_number(clf_obj, "k_r2", "$.params.clf", defaults.k_r2),
            k_d1=_number(clf_obj, "k_d1", "$.params.clf", defaults.k_d1),
            k_d2=_number(clf_obj, "k_d2", "$.params.clf", defaults.k_d2),
            omega_gamma_squared=_boolean(
                clf_obj, "omega_gamma_squared", "$.params.clf", defaults.omega_gamma_squared
            ),
        )
    except ValueError as exc:
        raise ScenarioFormatError(f"$.params.clf: {exc}") from exc

    qp_obj = _require_mapping(params.get("qp", {}), "$.params.qp")
    _check_keys(qp_obj, {"h1", "h2", "h3", "p", "mu", "eta"}, "$.params.qp")
    wd = QpWeights()
    try:
        weights = QpWeights(
            h1=_number(qp_obj, "h1", "$.params.qp", wd.h1),
            h2=_number(qp_obj, "h2", "$.params.qp", wd.h2),
            h3=_number(qp_obj, "h3", "$.params.qp", wd.h3),
            p=_number(qp_obj, "p", "$.params.qp", wd.p),
            mu=_number(qp_obj, "mu", "$.params.qp", wd.mu),
            eta=_number(qp_obj, "eta", "$.params.qp", wd.eta),
        )
    except ValueError as exc:
        raise ScenarioFormatError(f"$.params.qp: {exc}") from exc

    alip_obj = _require_mapping(params.get("alip", {}), "$.params.alip")
    _check_keys(alip_obj, {"gravity", "com_height", "tau"}, "$.params.alip")
    ad = AlipParams()
    try:
        alip = AlipParams(
            gravity=_number(alip_obj, "gravity", "$.params.alip", ad.gravity),
            com_height=_number(alip_obj, "com_height", "$.params.alip", ad.com_height),
            tau=_number(alip_obj, "tau", "$.params.alip", ad.tau),
        )
    except ValueError as exc:
        raise ScenarioFormatError(f"$.params.alip: {exc}") from exc

    runner_obj = _require_mapping(root.get("runner", {}), "$.runner")
    _check_keys(
        runner_obj,
        {
            "integrator",
            "local_map_radius",
            "step_budget",
            "epsilon_break",
            "break_equilibrium",
            "seed",
            "r_goal",
            "r_min",
            "u_eps",
            "collision_tol",
            "substeps",
            "noisy",
            "noise_bound",
        },
        "$.runner",
    )
    integrator = runner_obj.get("integrator", "kinematic")
    if not isinstance(integrator, str):
        raise ScenarioFormatError(f"$.runner.integrator: expected a string, got {integrator!r}")

    try:
        return Scenario(
            start=start,
            goal=goal,
            obstacles=tuple(obstacles),
            clf=clf,
            weights=weights,
            alip=alip,
            integrator=integrator,
            local_map_radius=_number(runner_obj, "local_map_radius", "$.runner", 10.0),
            step_budget=_integer(runner_obj, "step_budget", "$.runner", 2000),
            rng_seed=_integer(runner_obj, "seed", "$.runner", 0),
            r_goal=_number(runner_obj, "r_goal", "$.runner", 0.05),
            r_min=_number(runner_obj, "r_min", "$.runner", 1e-6),
            u_eps=_number(runner_obj, "u_eps", "$.runner", 1e-6),
            epsilon_break=_number(runner_obj, "epsilon_break", "$.runner", 1e-4),
            break_equilibrium=_boolean(runner_obj, "break_equilibrium", "$.runner", True),
            collision_tol=_number(runner_obj, "collision_tol", "$.runner", 1e-3),
            substeps=_integer(runner_obj, "substeps", "$.runner", 10),
            noisy=_boolean(runner_obj, "noisy", "$.runner", False),
            noise_bound=_number(runner_obj, "noise_bound", "$.runner", 0.05),
        )
    except ValueError as exc:
        raise ScenarioFormatError(f"$: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario JSON file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_scenario(document)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_trajectory_csv(record: TrajectoryRecord, path: str | Path) -> None:
    """One row per control step with the fixed 17-column header."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for step in record.steps:
            writer.writerow(
                [
                    _fmt(step.t),
                    _fmt(step.pose.x),
                    _fmt(step.pose.y),
                    _fmt(step.pose.theta),
                    _fmt(step.state.r),
                    _fmt(step.state.delta),
                    _fmt(step.u.v_x),
                    _fmt(step.u.v_y),
                    _fmt(step.u.omega),
                    _fmt(step.s),
                    _fmt(step.lambda1),
                    _fmt(step.lambda2),
                    step.case_tag.value,
                    _fmt(step.b_m),
                    _fmt(step.lyapunov_value),
                    _fmt(step.goal.x),
                    _fmt(step.goal.y),
                ]
            )


def read_trajectory_csv(path: str | Path) -> list[dict[str, Any]]:
    """Parse a trajectory CSV back into typed rows."""
    rows: list[dict[str, Any]] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != TRAJECTORY_COLUMNS:
            raise ValueError(f"{path}: unexpected trajectory header {reader.fieldnames}")
        for raw in reader:
            row: dict[str, Any] = {k: float(v) for k, v in raw.items() if k != "case"}
            row["case"] = raw["case"]
            rows.append(row)
    return rows


def summary_dict(record: TrajectoryRecord) -> dict[str, Any]:
    return {
        "status": record.status.value,
        "steps": len(record.steps),
        "min_barrier": None if math.isinf(record.min_barrier) else record.min_barrier,
        "final_r": record.final_r,
    }


def write_summary_json(record: TrajectoryRecord, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(summary_dict(record), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_sweep_csv(cells: list[SweepCell], path: str | Path) -> None:
    """Grid CSV (x_o, y_o, status) ready for heat-map plotting."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("x_o", "y_o", "status"))
        for cell in cells:
            writer.writerow((_fmt(cell.x), _fmt(cell.y), cell.status))


def write_campaign_summary(summary: CampaignSummary, path: str | Path) -> None:
    document = {
        "n_runs": summary.n_runs,
        "n_reached": summary.n_reached,
        "n_collisions": summary.n_collisions,
        "min_barrier": None if math.isinf(summary.min_barrier) else summary.min_barrier,
        "mean_steps": summary.mean_steps,
        "runs": [
            {
                "map": r.map_index,
                "run": r.run_index,
                "noisy": r.noisy,
                "status": r.status,
                "steps": r.steps,
                "min_barrier": None if math.isinf(r.min_barrier) else r.min_barrier,
                "start": [r.start.x, r.start.y, r.start.theta],
                "goal": [r.goal.x, r.goal.y],
            }
            for r in summary.runs
        ],
    }
    Path(path).write_text(
        json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
