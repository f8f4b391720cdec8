"""Independent reference computations shared by the test modules.

Nothing here reuses the library's active-set algebra: the QP oracle works
purely through function evaluations (a coarse feasible grid plus nested
convex line refinement with the analytic optimal slack), and the gradient
oracles are central finite differences pushed through the input matrix.
"""

from __future__ import annotations

import math

import numpy as np

from cbfnav.cbf import Obstacle, certify_and_select_kappas
from cbfnav.clf import ClfParams
from cbfnav.planning import GoalPosition, PlanningState, control_matrix, world_from_state
from cbfnav.qp import QpProblem, QpWeights, assemble

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def fd_gradient_through_g(value_fn, state: PlanningState, h: float = 1e-7) -> np.ndarray:
    """Central-difference gradient of a state function times g(x)."""
    base = (state.r, state.delta, state.theta)
    grad = []
    for i in range(3):
        bumped_up = list(base)
        bumped_dn = list(base)
        bumped_up[i] += h
        bumped_dn[i] -= h
        grad.append(
            (value_fn(PlanningState(*bumped_up)) - value_fn(PlanningState(*bumped_dn)))
            / (2.0 * h)
        )
    return np.array(grad) @ control_matrix(state)


def random_qp_instance(rng: np.random.Generator) -> tuple[QpProblem, QpWeights]:
    """One random solver instance over the documented sampling ranges.

    Ranges (log-uniform unless noted): range r in [0.2, 30]; bearing error
    and heading uniform over (-pi, pi); obstacle radius in [0.3, 3] with its
    center at a distance in [0.25, 12] radii from the robot, biased toward
    the heading 60% of the time so the safety constraint activates; weights
    h_i in [0.1, 10], slack weight in [1, 1000], progress decay in
    [0.01, 5], safety decay in [0.05, 5].
    """
    r = float(np.exp(rng.uniform(np.log(0.2), np.log(30.0))))
    state = PlanningState(
        r, float(rng.uniform(-np.pi, np.pi)), float(rng.uniform(-np.pi, np.pi))
    )
    goal = GoalPosition(0.0, 0.0)
    pose = world_from_state(state, goal)
    radius = float(np.exp(rng.uniform(np.log(0.3), np.log(3.0))))
    if rng.random() < 0.6:
        angle = pose.theta + rng.normal(0.0, 0.6)
    else:
        angle = rng.uniform(0.0, 2.0 * math.pi)
    distance = float(np.exp(rng.uniform(np.log(0.25 * radius), np.log(12.0 * radius))))
    obstacle = Obstacle(
        (pose.x + distance * math.cos(angle), pose.y + distance * math.sin(angle)), radius
    )
    weights = QpWeights(
        h1=float(np.exp(rng.uniform(np.log(0.1), np.log(10.0)))),
        h2=float(np.exp(rng.uniform(np.log(0.1), np.log(10.0)))),
        h3=float(np.exp(rng.uniform(np.log(0.1), np.log(10.0)))),
        p=float(np.exp(rng.uniform(np.log(1.0), np.log(1000.0)))),
        mu=float(np.exp(rng.uniform(np.log(0.01), np.log(5.0)))),
        eta=float(np.exp(rng.uniform(np.log(0.05), np.log(5.0)))),
    )
    field = certify_and_select_kappas([obstacle])
    return assemble(state, goal, field, ClfParams(), weights), weights


def _golden(f, lo: float, hi: float, iters: int = 80) -> float:
    """Golden-section minimum of a unimodal function on [lo, hi]."""
    if hi <= lo:
        return f(lo)
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    mid = 0.5 * (lo + hi)
    return min(f(mid), f1, f2)


def oracle_objective(problem: QpProblem, weights: QpWeights) -> float:
    """Brute-force optimal objective of the assembled safety-filter QP.

    A coarse feasible grid over the command box gives an upper bound, then
    nested golden-section searches refine it: the outer level sweeps the
    sagittal velocity, the middle level the lateral velocity over the
    interval the safety half-plane leaves available, and the turn rate plus
    the slack are minimized analytically (the safety row never involves the
    turn rate, and the optimal slack is max(0, progress residual)).
    Partial minimization keeps every level convex, so the line searches are
    exact to well beyond the comparison tolerance.
    """
    a_x, a_y, a_om = problem.clf_row.a_x, problem.clf_row.a_y, problem.clf_row.a_omega
    d_x, d_y = problem.cbf_row.d_x, problem.cbf_row.d_y
    ref_x, ref_y, ref_om = problem.u_ref.v_x, problem.u_ref.v_y, problem.u_ref.omega
    h1, h2, h3, p = weights.h1, weights.h2, weights.h3, weights.p
    mu_v = weights.mu * problem.lyapunov_value
    eta_b = weights.eta * problem.barrier_value

    def best_over_turn_rate(q: float) -> float:
        # min over omega of h3 (om - ref)^2 / 2 + p max(0, q + a_om om)^2 / 2
        if a_om == 0.0:
            s = max(0.0, q)
            return 0.5 * p * s * s
        best = math.inf
        if q + a_om * ref_om <= 0.0:
            best = 0.0
        om = (h3 * ref_om - p * a_om * q) / (h3 + p * a_om * a_om)
        if q + a_om * om >= 0.0:
            s = q + a_om * om
            best = min(best, 0.5 * h3 * (om - ref_om) ** 2 + 0.5 * p * s * s)
        kink = -q / a_om
        return min(best, 0.5 * h3 * (kink - ref_om) ** 2)

    def cost_xy(v_x: float, v_y: float) -> float:
        q = a_x * v_x + a_y * v_y + mu_v
        return (
            0.5 * h1 * (v_x - ref_x) ** 2
            + 0.5 * h2 * (v_y - ref_y) ** 2
            + best_over_turn_rate(q)
        )

    # Feasible anchor: the reference, pushed onto the safety half-plane if
    # it violates it.  Its cost bounds how far the optimum can sit.
    anchor = np.array([ref_x, ref_y, ref_om])
    normal = np.array([d_x, d_y, 0.0])
    norm_sq = float(normal @ normal)
    violation = d_x * ref_x + d_y * ref_y - eta_b
    if violation > 0.0:
        if norm_sq == 0.0:
            raise RuntimeError("instance has an empty feasible set")
        anchor = anchor - (violation / norm_sq) * normal
    slack = max(0.0, a_x * anchor[0] + a_y * anchor[1] + a_om * anchor[2] + mu_v)
    j_anchor = 0.5 * (
        h1 * (anchor[0] - ref_x) ** 2
        + h2 * (anchor[1] - ref_y) ** 2
        + h3 * (anchor[2] - ref_om) ** 2
        + p * slack * slack
    )

    radius_x = math.sqrt(2.0 * j_anchor / h1) + 1e-9
    radius_y = math.sqrt(2.0 * j_anchor / h2) + 1e-9

    def lateral_interval(v_x: float) -> tuple[float, float]:
        lo, hi = ref_y - radius_y, ref_y + radius_y
        if d_y > 0.0:
            bound = (eta_b - d_x * v_x) / d_y
            return (bound, bound) if bound < lo else (lo, min(hi, bound))
        if d_y < 0.0:
            bound = (eta_b - d_x * v_x) / d_y
            return (bound, bound) if bound > hi else (max(lo, bound), hi)
        return lo, hi

    lo_x, hi_x = ref_x - radius_x, ref_x + radius_x
    if d_y == 0.0 and d_x != 0.0:
        bound = eta_b / d_x
        if d_x > 0.0:
            lo_x, hi_x = ((bound, bound) if bound < lo_x else (lo_x, min(hi_x, bound)))
        else:
            lo_x, hi_x = ((bound, bound) if bound > hi_x else (max(lo_x, bound), hi_x))

    # Coarse grid upper bound over the feasible command box.
    best_grid = j_anchor
    for v_x in np.linspace(lo_x, hi_x, 9):
        g_lo, g_hi = lateral_interval(float(v_x))
        for v_y in np.linspace(g_lo, g_hi, 9):
            best_grid = min(best_grid, cost_xy(float(v_x), float(v_y)))

    def over_lateral(v_x: float) -> float:
        lo, hi = lateral_interval(v_x)
        return _golden(lambda v_y: cost_xy(v_x, v_y), lo, hi)

    return min(best_grid, _golden(over_lateral, lo_x, hi_x))
