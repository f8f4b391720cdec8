"""Closed-loop simulation: local maps, intermediate goals, stepping, logging.

Each control step sees only the obstacles inside a disk-shaped local map
around the robot.  When the final goal lies beyond the map, an intermediate
goal is placed where the map boundary crosses the robot-to-goal line, backed
off along that line if it lands inside an obstacle, and kept until reached
or invalidated.  The planning state is always built against the active
intermediate goal.

Per step the loop assembles and solves the safety-filter QP, watches for the
boundary stall (optionally breaking it by biasing the reference turn rate),
then advances one control interval with either the kinematic integrator
(RK4 sub-steps of the polar model) or the step-to-step walking model.  Runs
terminate on goal arrival, collision, an unbroken stall, a blocked
intermediate-goal segment, or step-budget exhaustion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .alip import AlipAxisState, AlipParams, alip_step
from .cbf import (
    Obstacle,
    ObstacleField,
    barrier,
    certify_and_select_kappas,
    empty_field,
)
from .clf import ClfParams
from .planning import (
    R_GOAL,
    R_MIN,
    ControlInput,
    GoalPosition,
    PlanningState,
    WorldPose,
    integrate_step,
    state_from_world,
    world_from_state,
)
from .qp import (
    CaseTag,
    QpWeights,
    assemble,
    detect_equilibrium,
    perturb_reference,
    solve,
)

KINEMATIC = "kinematic"
ALIP = "alip"
INTEGRATORS = (KINEMATIC, ALIP)


class RunStatus(str, Enum):
    REACHED_GOAL = "ReachedGoal"
    COLLISION = "Collision"
    STEP_BUDGET_EXHAUSTED = "StepBudgetExhausted"
    EQUILIBRIUM = "Equilibrium"
    NO_VALID_INTERMEDIATE_GOAL = "NoValidIntermediateGoal"


class NoValidIntermediateGoalError(RuntimeError):
    """Every candidate on the robot-to-goal segment lies inside an obstacle."""


@dataclass(frozen=True)
class Scenario:
    """One world description plus every knob the closed loop needs.

    A start pose inside an obstacle is allowed and tags the run as a
    recovery run; a goal inside an obstacle is rejected.  ``noise_bound``
    only matters in noisy mode, where the planner sees per-step jittered
    obstacles inflated by a conservative margin while collisions are judged
    against the true map.
    """

    start: WorldPose
    goal: GoalPosition
    obstacles: tuple[Obstacle, ...] = ()
    clf: ClfParams = ClfParams()
    weights: QpWeights = QpWeights()
    alip: AlipParams = AlipParams()
    integrator: str = KINEMATIC
    local_map_radius: float = 10.0
    step_budget: int = 2000
    rng_seed: int = 0
    r_goal: float = R_GOAL
    r_min: float = R_MIN
    u_eps: float = 1e-6
    epsilon_break: float = 1e-4
    break_equilibrium: bool = True
    collision_tol: float = 1e-3
    substeps: int = 10
    noisy: bool = False
    noise_bound: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.step_budget <= 0:
            raise ValueError(f"step_budget must be positive, got {self.step_budget!r}")
        if self.substeps <= 0:
            raise ValueError(f"substeps must be positive, got {self.substeps!r}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(
                f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}"
            )
        goal_pose = WorldPose(self.goal.x, self.goal.y, 0.0)
        for i, obstacle in enumerate(self.obstacles):
            if barrier(obstacle, goal_pose) <= 0.0:
                raise ValueError(f"goal lies inside the unsafe set of obstacle {i}")

    @property
    def control_interval(self) -> float:
        return self.alip.tau

    def is_recovery(self) -> bool:
        return any(barrier(o, self.start) <= 0.0 for o in self.obstacles)


@dataclass(frozen=True)
class StepRecord:
    """One logged control step; pose and state are pre-step, u is applied."""

    t: float
    pose: WorldPose
    state: PlanningState
    u: ControlInput
    s: float
    lambda1: float
    lambda2: float
    case_tag: CaseTag
    b_m: float
    lyapunov_value: float
    goal: GoalPosition


@dataclass(frozen=True)
class TrajectoryRecord:
    status: RunStatus
    steps: tuple[StepRecord, ...]
    min_barrier: float
    final_pose: WorldPose
    final_r: float

    def final_control_norm(self) -> float:
        return self.steps[-1].u.norm() if self.steps else 0.0


def select_intermediate_goal(
    pose: WorldPose,
    final_goal: GoalPosition,
    obstacles: tuple[Obstacle, ...] | list[Obstacle],
    radius: float,
    r_goal: float = R_GOAL,
    decrement: float | None = None,
) -> GoalPosition:
    """Place the goal the planner steers to inside the local map.

    The final goal is used directly when it lies within the map; otherwise
    the candidate starts where the map boundary crosses the robot-to-goal
    line and backs off toward the robot in fixed decrements until it clears
    every obstacle.  Raises NoValidIntermediateGoalError when the whole
    segment is blocked.
    """
    if radius <= 0.0:
        raise ValueError(f"local map radius must be positive, got {radius!r}")
    dx = final_goal.x - pose.x
    dy = final_goal.y - pose.y
    distance = math.hypot(dx, dy)
    if distance <= radius:
        return final_goal
    ux, uy = dx / distance, dy / distance
    step = radius / 20.0 if decrement is None else decrement
    length = radius
    while length > r_goal:
        candidate = GoalPosition(pose.x + length * ux, pose.y + length * uy)
        candidate_pose = WorldPose(candidate.x, candidate.y, 0.0)
        if all(barrier(o, candidate_pose) > 0.0 for o in obstacles):
            return candidate
        length -= step
    raise NoValidIntermediateGoalError(
        f"no clear intermediate goal on the segment from ({pose.x:.3f}, {pose.y:.3f}) "
        f"toward ({final_goal.x:.3f}, {final_goal.y:.3f})"
    )


def _perceived_obstacles(
    scenario: Scenario, rng: np.random.Generator
) -> tuple[Obstacle, ...]:
    """The obstacle set the planner sees this step.

    Noisy mode jitters centers within a disk and radii within half the
    bound, then inflates every radius by a margin covering the worst-case
    perception error, so planning against the jittered set still keeps the
    robot clear of the true obstacles.
    """
    if not scenario.noisy:
        return scenario.obstacles
    bound = scenario.noise_bound
    margin = 1.5 * bound + 0.01
    jittered = []
    for o in scenario.obstacles:
        angle = rng.uniform(0.0, 2.0 * math.pi)
        rad = bound * math.sqrt(rng.uniform())
        dr = rng.uniform(-0.5 * bound, 0.5 * bound)
        jittered.append(
            Obstacle(
                (o.center[0] + rad * math.cos(angle), o.center[1] + rad * math.sin(angle)),
                max(o.radius + dr, 0.1 * o.radius) + margin,
                o.q,
            )
        )
    return tuple(jittered)


def _window(
    obstacles: tuple[Obstacle, ...], pose: WorldPose, radius: float
) -> tuple[Obstacle, ...]:
    """Obstacles whose bounding circle intersects the local map disk."""
    return tuple(
        o
        for o in obstacles
        if math.hypot(o.center[0] - pose.x, o.center[1] - pose.y)
        <= radius + o.effective_radius
    )


def _advance(
    scenario: Scenario,
    pose: WorldPose,
    state: PlanningState,
    goal: GoalPosition,
    u: ControlInput,
    axis_x: AlipAxisState,
    axis_y: AlipAxisState,
) -> tuple[WorldPose, AlipAxisState, AlipAxisState]:
    """One control interval under constant input with the chosen integrator."""
    if scenario.integrator == ALIP:
        return alip_step(pose, axis_x, axis_y, u, scenario.alip)
    dt = scenario.control_interval / scenario.substeps
    for _ in range(scenario.substeps):
        state = integrate_step(state, u, dt, scenario.r_min)
    return world_from_state(state, goal), axis_x, axis_y


def run(scenario: Scenario) -> TrajectoryRecord:
    """Simulate one scenario to termination and return the full log."""
    if len(scenario.obstacles) >= 2:
        certify_and_select_kappas(scenario.obstacles)

    rng = np.random.default_rng(scenario.rng_seed)
    tau = scenario.control_interval
    pose = scenario.start
    axis_x = AlipAxisState()
    axis_y = AlipAxisState()
    intermediate: GoalPosition | None = None
    breaking = False
    records: list[StepRecord] = []

    # Obstacles the start pose already violates get a grace period until the
    # robot first leaves them (recovery runs); everything else is armed now.
    armed = [barrier(o, pose) > 0.0 for o in scenario.obstacles]
    min_barrier = math.inf
    for o in scenario.obstacles:
        min_barrier = min(min_barrier, barrier(o, pose))

    status = RunStatus.STEP_BUDGET_EXHAUSTED
    for step_index in range(scenario.step_budget):
        if math.hypot(scenario.goal.x - pose.x, scenario.goal.y - pose.y) < scenario.r_goal:
            status = RunStatus.REACHED_GOAL
            break

        perceived = _perceived_obstacles(scenario, rng)
        window = _window(perceived, pose, scenario.local_map_radius)
        field = certify_and_select_kappas(window) if window else empty_field()

        final_dist = math.hypot(scenario.goal.x - pose.x, scenario.goal.y - pose.y)
        if final_dist <= scenario.local_map_radius:
            intermediate = scenario.goal
        else:
            stale = (
                intermediate is None
                or math.hypot(intermediate.x - pose.x, intermediate.y - pose.y)
                < scenario.r_goal
                or any(
                    barrier(o, WorldPose(intermediate.x, intermediate.y, 0.0)) <= 0.0
                    for o in window
                )
            )
            if stale:
                try:
                    intermediate = select_intermediate_goal(
                        pose,
                        scenario.goal,
                        window,
                        scenario.local_map_radius,
                        scenario.r_goal,
                    )
                except NoValidIntermediateGoalError:
                    status = RunStatus.NO_VALID_INTERMEDIATE_GOAL
                    break

        state = state_from_world(pose, intermediate, scenario.r_min)
        problem = assemble(state, intermediate, field, scenario.clf, scenario.weights, scenario.r_min)
        solution = solve(problem, scenario.weights)
        report = detect_equilibrium(
            solution, state, problem, scenario.u_eps, scenario.r_goal
        )
        if report.is_equilibrium and not breaking:
            if not scenario.break_equilibrium:
                records.append(
                    StepRecord(
                        step_index * tau,
                        pose,
                        state,
                        solution.u_star,
                        solution.s_star,
                        solution.lambda1,
                        solution.lambda2,
                        solution.case_tag,
                        problem.barrier_value,
                        problem.lyapunov_value,
                        intermediate,
                    )
                )
                status = RunStatus.EQUILIBRIUM
                break
            breaking = True
        if breaking:
            perturbed = replace(
                problem,
                u_ref=perturb_reference(problem.u_ref, scenario.epsilon_break),
            )
            solution = solve(perturbed, scenario.weights)
            if solution.u_star.norm() > 10.0 * scenario.u_eps:
                breaking = False

        records.append(
            StepRecord(
                step_index * tau,
                pose,
                state,
                solution.u_star,
                solution.s_star,
                solution.lambda1,
                solution.lambda2,
                solution.case_tag,
                problem.barrier_value,
                problem.lyapunov_value,
                intermediate,
            )
        )

        pose, axis_x, axis_y = _advance(
            scenario, pose, state, intermediate, solution.u_star, axis_x, axis_y
        )

        collided = False
        for i, o in enumerate(scenario.obstacles):
            b = barrier(o, pose)
            min_barrier = min(min_barrier, b)
            if not armed[i] and b >= 0.0:
                armed[i] = True
            if armed[i] and b < -scenario.collision_tol:
                collided = True
        if collided:
            status = RunStatus.COLLISION
            break
    else:
        if (
            math.hypot(scenario.goal.x - pose.x, scenario.goal.y - pose.y)
            < scenario.r_goal
        ):
            status = RunStatus.REACHED_GOAL

    final_r = math.hypot(scenario.goal.x - pose.x, scenario.goal.y - pose.y)
    if not scenario.obstacles:
        min_barrier = math.inf
    return TrajectoryRecord(status, tuple(records), min_barrier, pose, final_r)


@dataclass(frozen=True)
class SweepCell:
    """Result of one liveness-sweep placement."""

    x: float
    y: float
    status: str
    steps: int
    min_barrier: float


EXCLUDED = "Excluded"


def _sweep_cell(args: tuple[Scenario, float, float, float]) -> SweepCell:
    base, x, y, radius = args
    obstacle = Obstacle((x, y), radius)
    if (
        barrier(obstacle, base.start) <= 0.0
        or barrier(obstacle, WorldPose(base.goal.x, base.goal.y, 0.0)) <= 0.0
    ):
        return SweepCell(x, y, EXCLUDED, 0, math.inf)
    record = run(replace(base, obstacles=(obstacle,)))
    return SweepCell(x, y, record.status.value, len(record.steps), record.min_barrier)


def liveness_sweep(
    base: Scenario,
    obstacle_radius: float = 1.0,
    spacing: float = 1.0,
    x_range: tuple[float, float] = (-16.0, 1.0),
    y_range: tuple[float, float] = (-16.0, 1.0),
    workers: int = 1,
) -> list[SweepCell]:
    """Run one scenario per obstacle placement on a regular grid.

    Placements whose unsafe set already touches the start or the goal are
    marked excluded without running.  Results come back in grid order
    regardless of worker count.
    """
    if spacing <= 0.0:
        raise ValueError(f"spacing must be positive, got {spacing!r}")
    xs = np.arange(x_range[0], x_range[1] + 0.5 * spacing, spacing)
    ys = np.arange(y_range[0], y_range[1] + 0.5 * spacing, spacing)
    tasks = [(base, float(x), float(y), obstacle_radius) for x in xs for y in ys]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_cell, tasks, chunksize=8))
    return [_sweep_cell(t) for t in tasks]


@dataclass(frozen=True)
class RunSummary:
    map_index: int
    run_index: int
    noisy: bool
    status: str
    steps: int
    min_barrier: float
    start: WorldPose
    goal: GoalPosition


@dataclass(frozen=True)
class CampaignSummary:
    runs: tuple[RunSummary, ...]

    @property
    def n_runs(self) -> int:
        return len(self.runs)

    @property
    def n_reached(self) -> int:
        return sum(1 for r in self.runs if r.status == RunStatus.REACHED_GOAL.value)

    @property
    def n_collisions(self) -> int:
        return sum(1 for r in self.runs if r.status == RunStatus.COLLISION.value)

    @property
    def min_barrier(self) -> float:
        finite = [r.min_barrier for r in self.runs if math.isfinite(r.min_barrier)]
        return min(finite) if finite else math.inf

    @property
    def mean_steps(self) -> float:
        return sum(r.steps for r in self.runs) / len(self.runs) if self.runs else 0.0


def generate_obstacle_map(
    rng: np.random.Generator,
    n_obstacles: int = 20,
    width: float = 50.0,
    height: float = 30.0,
    radius_range: tuple[float, float] = (0.7, 1.5),
    min_gap: float = 1.0,
    max_tries: int = 20000,
) -> tuple[Obstacle, ...]:
    """Rejection-sample circular obstacles with a guaranteed pairwise gap."""
    obstacles: list[Obstacle] = []
    tries = 0
    while len(obstacles) < n_obstacles:
        tries += 1
        if tries > max_tries:
            raise RuntimeError(
                f"could not place {n_obstacles} obstacles with gap {min_gap} "
                f"in {width}x{height} after {max_tries} tries"
            )
        radius = float(rng.uniform(*radius_range))
        x = float(rng.uniform(radius + 0.5, width - radius - 0.5))
        y = float(rng.uniform(radius + 0.5, height - radius - 0.5))
        if all(
            math.hypot(x - o.center[0], y - o.center[1]) - radius - o.radius >= min_gap
            for o in obstacles
        ):
            obstacles.append(Obstacle((x, y), radius))
    return tuple(obstacles)


def _sample_clear_point(
    rng: np.random.Generator,
    obstacles: tuple[Obstacle, ...],
    width: float,
    height: float,
    clearance: float,
) -> tuple[float, float]:
    while True:
        x = float(rng.uniform(1.0, width - 1.0))
        y = float(rng.uniform(1.0, height - 1.0))
        pose = WorldPose(x, y, 0.0)
        if all(barrier(o, pose) > clearance for o in obstacles):
            return x, y


def _campaign_run(args: tuple[Scenario, int, int, bool]) -> RunSummary:
    scenario, map_index, run_index, noisy = args
    record = run(scenario)
    return RunSummary(
        map_index,
        run_index,
        noisy,
        record.status.value,
        len(record.steps),
        record.min_barrier,
        scenario.start,
        scenario.goal,
    )


def campaign(
    base: Scenario | None = None,
    n_maps: int = 4,
    runs_per_map: int = 6,
    n_obstacles: int = 20,
    width: float = 50.0,
    height: float = 30.0,
    seed: int = 0,
    noisy_maps: str = "half",
    workers: int = 1,
) -> CampaignSummary:
    """Synthetic multi-obstacle study: several maps, several runs per map.

    ``noisy_maps`` is "none", "all", or "half" (second half of the maps run
    in noisy mode, mirroring a half noise-free, half noisy study).  Start
    and goal of every run are sampled clear of obstacles and at least 15 m
    apart.  Fully deterministic for a given seed.
    """
    if base is None:
        base = Scenario(start=WorldPose(0.0, 0.0, 0.0), goal=GoalPosition(1.0, 1.0))
    if noisy_maps not in ("none", "all", "half"):
        raise ValueError(f"noisy_maps must be none/all/half, got {noisy_maps!r}")

    tasks = []
    for map_index in range(n_maps):
        map_rng = np.random.default_rng((seed, map_index))
        obstacles = generate_obstacle_map(
            map_rng, n_obstacles=n_obstacles, width=width, height=height
        )
        noisy = noisy_maps == "all" or (noisy_maps == "half" and map_index >= n_maps // 2)
        for run_index in range(runs_per_map):
            while True:
                sx, sy = _sample_clear_point(map_rng, obstacles, width, height, 0.5)
                gx, gy = _sample_clear_point(map_rng, obstacles, width, height, 0.5)
                if math.hypot(gx - sx, gy - sy) >= 15.0:
                    break
            heading = float(map_rng.uniform(-math.pi, math.pi))
            scenario = replace(
                base,
                start=WorldPose(sx, sy, heading),
                goal=GoalPosition(gx, gy),
                obstacles=obstacles,
                integrator=ALIP,
                noisy=noisy,
                rng_seed=int(map_rng.integers(0, 2**31 - 1)),
            )
            tasks.append((scenario, map_index, run_index, noisy))

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_campaign_run, tasks))
    else:
        summaries = [_campaign_run(t) for t in tasks]
    return CampaignSummary(tuple(summaries))
