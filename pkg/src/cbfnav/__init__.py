"""Reactive obstacle avoidance for planar goal seeking.

Control commands come from a closed-form goal-seeking reference controller,
minimally filtered through a small quadratic program whose hard constraint
is a single continuously differentiable barrier composed from all nearby
obstacles.  The package also ships the closed-loop simulator (kinematic and
step-to-step walking models), liveness and multi-obstacle study harnesses,
and a CLI.
"""

from .alip import AlipAxisState, AlipParams, alip_step, axis_step, placement_for_velocity
from .cbf import (
    CbfRow,
    Obstacle,
    ObstacleField,
    OverlappingObstaclesError,
    barrier,
    cbf_row,
    certify_and_select_kappas,
    empty_field,
    product_barrier,
    product_row,
    saturate,
    saturate_deriv,
    saturate_scaled,
    saturate_scaled_deriv,
)
from .clf import ClfParams, ClfRow, clf_row, lyapunov, reference_control
from .planning import (
    ControlInput,
    DomainError,
    GoalPosition,
    PlanningState,
    WorldPose,
    control_matrix,
    integrate_step,
    state_derivative,
    state_from_world,
    world_from_state,
    wrap_angle,
)
from .qp import (
    CaseTag,
    EquilibriumReport,
    NoValidCaseError,
    QpInfeasibleError,
    QpProblem,
    QpSolution,
    QpWeights,
    assemble,
    constraint_values,
    detect_equilibrium,
    kkt_residuals,
    objective,
    perturb_reference,
    solve,
)
from .runner import (
    CampaignSummary,
    NoValidIntermediateGoalError,
    RunStatus,
    RunSummary,
    Scenario,
    StepRecord,
    SweepCell,
    TrajectoryRecord,
    campaign,
    generate_obstacle_map,
    liveness_sweep,
    run,
    select_intermediate_goal,
)
from .scenario_io import (
    ScenarioFormatError,
    load_scenario,
    parse_scenario,
    read_trajectory_csv,
    write_summary_json,
    write_sweep_csv,
    write_trajectory_csv,
)

__version__ = "0.1.0"
