"""Exact active-set solve of the per-step safety-filter quadratic program.

Each control step minimally edits the reference command subject to a soft
goal-progress constraint and a hard safety constraint:

    minimize    (u - u_ref)^T H (u - u_ref) / 2 + p s^2 / 2
    subject to  a . u + mu V - s <= 0          (progress, slack s)
                d_x v_x + d_y v_y - eta B <= 0  (safety)

with H = diag(h1, h2, h3), a = L_gV, and (d_x, d_y) the negated barrier row.
Because the problem has two inequality constraints and a strictly convex
objective, the optimum is found exactly by enumerating the four active-set
cases of the KKT system; each case has a closed form and the first candidate
passing primal and dual feasibility is the unique minimizer (ties between
cases can differ only in the tag, not the point).

The only interior equilibrium this filter can create sits on an obstacle
boundary directly between the robot and its goal (B = 0, delta = 0, d_y = 0,
d_x > 0); it is detected from a vanishing optimal command and broken by
biasing the reference turn rate with a small epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .cbf import CbfRow, ObstacleField, product_barrier, product_row
from .clf import ClfParams, ClfRow, clf_row, lyapunov, reference_control
from .planning import R_GOAL, R_MIN, ControlInput, DomainError, GoalPosition, PlanningState

#: Feasibility / dual-sign tolerance of the case enumeration.
KKT_TOL = 1e-8

#: Relative singularity threshold on the both-active 2x2 determinant.
DET_TOL = 1e-12


class QpInfeasibleError(RuntimeError):
    """The both-active system is singular (degenerate constraint geometry)."""


class NoValidCaseError(RuntimeError):
    """No active-set case satisfied the KKT conditions; tolerance problem."""


class CaseTag(str, Enum):
    BOTH_INACTIVE = "BothInactive"
    CBF_ONLY = "CbfOnly"
    CLF_ONLY = "ClfOnly"
    BOTH_ACTIVE = "BothActive"


@dataclass(frozen=True)
class QpWeights:
    """Control weights (diagonal of H), slack weight, and decay rates.

    Defaults keep sagittal motion cheap and lateral motion dear, with a
    heavily weighted slack so progress only yields when safety demands it.
    """

    h1: float = 1.0
    h2: float = 4.0
    h3: float = 2.0
    p: float = 100.0
    mu: float = 0.2
    eta: float = 1.0

    def __post_init__(self) -> None:
        for name in ("h1", "h2", "h3", "p", "mu", "eta"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"QpWeights.{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class QpProblem:
    """Assembled per-step constraint data."""

    clf_row: ClfRow
    lyapunov_value: float
    cbf_row: CbfRow
    barrier_value: float
    u_ref: ControlInput


@dataclass(frozen=True)
class QpSolution:
    """Optimal command, slack, multipliers, and which constraints were active."""

    u_star: ControlInput
    s_star: float
    lambda1: float
    lambda2: float
    case_tag: CaseTag


@dataclass(frozen=True)
class EquilibriumReport:
    """Signature quantities of a detected zero-command stall."""

    is_equilibrium: bool
    b_value: float
    delta: float
    d_x: float
    d_y: float


def assemble(
    state: PlanningState,
    goal: GoalPosition,
    field: ObstacleField,
    clf_params: ClfParams,
    weights: QpWeights,
    r_min: float = R_MIN,
) -> QpProblem:
    """Evaluate both constraint rows and the reference command at one state.

    The drift term of the dynamics is zero, so neither constraint carries a
    drift contribution.  An empty field yields the trivial barrier B = 1 with
    a zero row, leaving the safety constraint permanently slack.
    """
    row_d = product_row(field, state, goal, r_min)
    b_value = product_barrier(field, state, goal)
    if b_value < 0.0 and row_d.d_x == 0.0 and row_d.d_y == 0.0:
        raise DomainError("robot is at an obstacle center; the barrier row vanishes")
    return QpProblem(
        clf_row=clf_row(state, clf_params, r_min),
        lyapunov_value=lyapunov(state, clf_params),
        cbf_row=row_d,
        barrier_value=b_value,
        u_ref=reference_control(state, clf_params, r_min),
    )


def objective(problem: QpProblem, weights: QpWeights, u: ControlInput, s: float) -> float:
    """Quadratic cost of a candidate (u, s) for the assembled problem."""
    ref = problem.u_ref
    return 0.5 * (
        weights.h1 * (u.v_x - ref.v_x) ** 2
        + weights.h2 * (u.v_y - ref.v_y) ** 2
        + weights.h3 * (u.omega - ref.omega) ** 2
        + weights.p * s * s
    )


def constraint_values(
    problem: QpProblem, weights: QpWeights, u: ControlInput, s: float
) -> tuple[float, float]:
    """(progress, safety) constraint values; feasible when both <= 0."""
    progress = problem.clf_row.dot(u) + weights.mu * problem.lyapunov_value - s
    safety = problem.cbf_row.dot(u) - weights.eta * problem.barrier_value
    return progress, safety


def solve(problem: QpProblem, weights: QpWeights, tol: float = KKT_TOL) -> QpSolution:
    """Solve the QP exactly by enumerating the four active-set cases.

    Cases are tried in the order both-inactive, safety-active,
    progress-active, both-active; the first whose candidate satisfies primal
    feasibility and nonnegative multipliers is returned.
    """
    a, d = problem.clf_row, problem.cbf_row
    v_value, b_value = problem.lyapunov_value, problem.barrier_value
    ref = problem.u_ref
    h1, h2, h3, p = weights.h1, weights.h2, weights.h3, weights.p

    g_a = a.a_x**2 / h1 + a.a_y**2 / h2 + a.a_omega**2 / h3
    g_d = d.d_x**2 / h1 + d.d_y**2 / h2
    g_ad = a.a_x * d.d_x / h1 + a.a_y * d.d_y / h2
    c1 = a.dot(ref) + weights.mu * v_value
    c2 = d.dot(ref) - weights.eta * b_value

    # Both inactive: keep the reference.
    if c1 <= tol and c2 <= tol:
        return QpSolution(ref, 0.0, 0.0, 0.0, CaseTag.BOTH_INACTIVE)

    # Safety active only.
    if g_d > 0.0:
        lam2 = c2 / g_d
        if lam2 >= -tol:
            u = ControlInput(
                ref.v_x - lam2 * d.d_x / h1,
                ref.v_y - lam2 * d.d_y / h2,
                ref.omega,
            )
            if c1 - lam2 * g_ad <= tol:
                return QpSolution(u, 0.0, 0.0, max(lam2, 0.0), CaseTag.CBF_ONLY)

    # Progress active only.
    lam1 = p * c1 / (p * g_a + 1.0)
    if lam1 >= -tol and c2 - lam1 * g_ad <= tol:
        lam1 = max(lam1, 0.0)
        u = ControlInput(
            ref.v_x - lam1 * a.a_x / h1,
            ref.v_y - lam1 * a.a_y / h2,
            ref.omega - lam1 * a.a_omega / h3,
        )
        return QpSolution(u, lam1 / p, lam1, 0.0, CaseTag.CLF_ONLY)

    # Both active: eliminate u from the two equality constraints.
    det = (g_a + 1.0 / p) * g_d - g_ad * g_ad
    scale = max(1.0, abs(g_a + 1.0 / p) * abs(g_d), g_ad * g_ad)
    if abs(det) <= DET_TOL * scale:
        raise QpInfeasibleError(
            f"both-active system is singular: det={det!r}, "
            f"g_a={g_a!r}, g_d={g_d!r}, g_ad={g_ad!r}"
        )
    lam1 = (c1 * g_d - c2 * g_ad) / det
    lam2 = ((g_a + 1.0 / p) * c2 - g_ad * c1) / det
    if lam1 >= -tol and lam2 >= -tol:
        lam1, lam2 = max(lam1, 0.0), max(lam2, 0.0)
        u = ControlInput(
            ref.v_x - (lam1 * a.a_x + lam2 * d.d_x) / h1,
            ref.v_y - (lam1 * a.a_y + lam2 * d.d_y) / h2,
            ref.omega - lam1 * a.a_omega / h3,
        )
        return QpSolution(u, lam1 / p, lam1, lam2, CaseTag.BOTH_ACTIVE)

    raise NoValidCaseError(
        f"active-set enumeration exhausted: c1={c1!r}, c2={c2!r}, "
        f"g_a={g_a!r}, g_d={g_d!r}, g_ad={g_ad!r}"
    )


def kkt_residuals(
    problem: QpProblem, weights: QpWeights, solution: QpSolution
) -> dict[str, float]:
    """Certificate residuals of a solution; all should be <= KKT_TOL.

    Keys: ``stationarity`` (inf-norm of the gradient of the Lagrangian),
    ``primal`` (largest constraint violation), ``dual`` (most negative
    multiplier, as a magnitude), ``complementarity`` (largest
    multiplier-times-residual product), and ``slack`` (|p s - lambda1|).
    """
    a, d = problem.clf_row, problem.cbf_row
    u, s = solution.u_star, solution.s_star
    lam1, lam2 = solution.lambda1, solution.lambda2
    ref = problem.u_ref

    grad_u = (
        weights.h1 * (u.v_x - ref.v_x) + lam1 * a.a_x + lam2 * d.d_x,
        weights.h2 * (u.v_y - ref.v_y) + lam1 * a.a_y + lam2 * d.d_y,
        weights.h3 * (u.omega - ref.omega) + lam1 * a.a_omega,
    )
    progress, safety = constraint_values(problem, weights, u, s)
    return {
        "stationarity": max(abs(v) for v in grad_u),
        "primal": max(progress, safety, 0.0),
        "dual": max(-lam1, -lam2, 0.0),
        "complementarity": max(abs(lam1 * progress), abs(lam2 * safety)),
        "slack": abs(weights.p * s - lam1),
    }


def detect_equilibrium(
    solution: QpSolution,
    state: PlanningState,
    problem: QpProblem,
    u_eps: float = 1e-6,
    r_goal: float = R_GOAL,
) -> EquilibriumReport:
    """Flag a vanished optimal command away from the goal.

    At a true stall the report carries the boundary signature: barrier near
    zero, bearing error near zero, d_y near zero, and d_x positive.
    """
    stalled = solution.u_star.norm() <= u_eps and state.r > r_goal
    return EquilibriumReport(
        is_equilibrium=stalled,
        b_value=problem.barrier_value,
        delta=state.delta,
        d_x=problem.cbf_row.d_x,
        d_y=problem.cbf_row.d_y,
    )


def perturb_reference(u_ref: ControlInput, epsilon: float) -> ControlInput:
    """Bias the reference turn rate by epsilon to break a boundary stall."""
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon!r}")
    return ControlInput(u_ref.v_x, u_ref.v_y, u_ref.omega + epsilon)
