"""Quadratic obstacle barriers, smooth saturation, and product composition.

A single obstacle contributes the barrier

    B(x) = (p - c)^T Q (p - c) - r_o^2

over the reconstructed robot position p, positive outside the unsafe set.
Its constraint row follows the chain rule through the polar coordinates,
L_gB = a(x) b(x) g(x), whose third component is structurally zero: the
barrier cannot be influenced by the turn rate.  Rows are stored negated as
(d_x, d_y) so the safety constraint reads d_x v_x + d_y v_y <= eta B.

Multiple disjoint obstacles compose through the C1 saturation

    sigma(s) = s            s <= 0
             = s(1+s-s^2)   0 < s < 1
             = 1            s >= 1

applied per obstacle at scale kappa_i, sigma_ki(s) = sigma(s / kappa_i), and
multiplied into a single barrier B_M = prod_i sigma_ki(B_i).  When the
kappa_i are certified small enough that each factor saturates to one before
any other obstacle's unsafe set begins, B_M < 0 pins exactly one unsaturated
factor and the composite inherits that obstacle's barrier behaviour, so one
QP constraint covers the whole field.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .planning import (
    R_MIN,
    ControlInput,
    DomainError,
    GoalPosition,
    PlanningState,
    WorldPose,
    control_matrix,
    world_from_state,
)

#: Tolerance on the structurally-zero turn-rate component of L_gB.
ROW_THIRD_COMPONENT_TOL = 1e-12


class OverlappingObstaclesError(ValueError):
    """Two obstacles are not a positive distance apart."""

    def __init__(self, i: int, j: int, gap: float) -> None:
        self.pair = (i, j)
        self.gap = gap
        super().__init__(
            f"obstacles {i} and {j} are not a positive distance apart (gap {gap:.6g} m)"
        )


@dataclass(frozen=True, eq=False)
class Obstacle:
    """One quadratic unsafe set: center, shape matrix Q (SPD), and radius."""

    center: tuple[float, float]
    radius: float
    q: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise ValueError(f"obstacle radius must be positive, got {self.radius!r}")
        q = np.eye(2) if self.q is None else np.asarray(self.q, dtype=float)
        if q.shape != (2, 2):
            raise ValueError(f"shape matrix must be 2x2, got shape {q.shape}")
        if not np.allclose(q, q.T, atol=1e-12):
            raise ValueError("shape matrix must be symmetric")
        if np.linalg.eigvalsh(q).min() <= 0.0:
            raise ValueError("shape matrix must be positive definite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def effective_radius(self) -> float:
        """Radius of the circle bounding the unsafe set: r_o / sqrt(lambda_min(Q))."""
        return self.radius / math.sqrt(float(np.linalg.eigvalsh(self.q).min()))


def barrier(obstacle: Obstacle, pose: WorldPose) -> float:
    """Barrier value at the robot position; negative inside the unsafe set."""
    dx = pose.x - obstacle.center[0]
    dy = pose.y - obstacle.center[1]
    q = obstacle.q
    return q[0, 0] * dx * dx + 2.0 * q[0, 1] * dx * dy + q[1, 1] * dy * dy - obstacle.radius**2


@dataclass(frozen=True)
class CbfRow:
    """Negated barrier row (d_x, d_y) = -L_gB restricted to its nonzero components."""

    d_x: float
    d_y: float

    def dot(self, u: ControlInput) -> float:
        return self.d_x * u.v_x + self.d_y * u.v_y

    def norm(self) -> float:
        return math.hypot(self.d_x, self.d_y)


def cbf_row(
    obstacle: Obstacle,
    state: PlanningState,
    goal: GoalPosition,
    r_min: float = R_MIN,
) -> CbfRow:
    """Constraint row of one obstacle's barrier at the current state.

    Computed literally as a(x) b(x) g(x) with a = 2 (p - c)^T Q and b the
    Jacobian of the position reconstruction; the turn-rate component must
    cancel exactly and is asserted to within ROW_THIRD_COMPONENT_TOL.
    """
    pose = world_from_state(state, goal)
    a = np.array(
        [2.0 * (pose.x - obstacle.center[0]), 2.0 * (pose.y - obstacle.center[1])]
    ) @ obstacle.q
    los = state.delta + state.theta
    sl, cl = math.sin(los), math.cos(los)
    b = np.array(
        [
            [-cl, state.r * sl, state.r * sl],
            [-sl, -state.r * cl, -state.r * cl],
        ]
    )
    row = (a @ b) @ control_matrix(state, r_min)
    if abs(row[2]) > ROW_THIRD_COMPONENT_TOL:
        raise AssertionError(
            f"turn-rate component of the barrier row should vanish, got {row[2]!r}"
        )
    return CbfRow(-float(row[0]), -float(row[1]))


def saturate(s: float) -> float:
    """C1 saturation: identity below zero, cubic rise, one from s = 1 on."""
    if s <= 0.0:
        return s
    if s >= 1.0:
        return 1.0
    return s * (1.0 + s - s * s)


def saturate_deriv(s: float) -> float:
    """Derivative of ``saturate``; continuous, in [0, 4/3]."""
    if s <= 0.0:
        return 1.0
    if s >= 1.0:
        return 0.0
    return 1.0 + 2.0 * s - 3.0 * s * s


def saturate_scaled(s: float, kappa: float) -> float:
    """sigma(s / kappa); kappa = inf means no saturation (identity)."""
    if math.isinf(kappa):
        return s
    return saturate(s / kappa)


def saturate_scaled_deriv(s: float, kappa: float) -> float:
    """d/ds sigma(s / kappa); kappa = inf means slope one everywhere."""
    if math.isinf(kappa):
        return 1.0
    return saturate_deriv(s / kappa) / kappa


@dataclass(frozen=True, eq=False)
class ObstacleField:
    """A certified set of disjoint obstacles with their saturation scales.

    ``pairwise_gaps[i, j]`` is the conservative clearance between bounding
    circles i and j.  A single obstacle gets kappa = inf (no saturation); an
    empty field is the trivial barrier B_M = 1.
    """

    obstacles: tuple[Obstacle, ...]
    kappas: tuple[float, ...]
    pairwise_gaps: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __len__(self) -> int:
        return len(self.obstacles)


def empty_field() -> ObstacleField:
    """Field with no obstacles; the product barrier is identically one."""
    return ObstacleField((), ())


def certify_and_select_kappas(obstacles: list[Obstacle] | tuple[Obstacle, ...]) -> ObstacleField:
    """Check pairwise clearance and pick saturation scales for a field.

    Gaps use conservative bounding circles, gap_ij = |c_i - c_j| - r_eff_i -
    r_eff_j, and must all be positive.  Every kappa is set to the square of
    the smallest per-obstacle clearance, then capped below the admissibility
    bound m*_i = (r_o_i + sqrt(lambda_min(Q_i)) Delta_i)^2 - r_o_i^2 that
    keeps each factor saturated at one inside every other unsafe set.
    """
    obstacles = tuple(obstacles)
    m = len(obstacles)
    if m == 0:
        raise ValueError("certification needs at least one obstacle")
    if m == 1:
        return ObstacleField(obstacles, (math.inf,), np.zeros((1, 1)))

    centers = np.array([o.center for o in obstacles])
    r_eff = np.array([o.effective_radius for o in obstacles])
    gaps = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            gap = float(np.linalg.norm(centers[i] - centers[j])) - r_eff[i] - r_eff[j]
            if gap <= 0.0:
                raise OverlappingObstaclesError(i, j, gap)
            gaps[i, j] = gaps[j, i] = gap

    deltas = np.where(np.eye(m, dtype=bool), np.inf, gaps).min(axis=1)
    kappa_shared = float(deltas.min()) ** 2

    kappas = []
    for i, obstacle in enumerate(obstacles):
        lam_min = float(np.linalg.eigvalsh(obstacle.q).min())
        m_star = (obstacle.radius + math.sqrt(lam_min) * deltas[i]) ** 2 - obstacle.radius**2
        if kappa_shared < m_star:
            kappas.append(kappa_shared)
        else:
            warnings.warn(
                f"shared kappa {kappa_shared:.6g} exceeds admissibility bound "
                f"{m_star:.6g} for obstacle {i}; shrinking",
                stacklevel=2,
            )
            kappas.append(0.9 * m_star)
    return ObstacleField(obstacles, tuple(kappas), gaps)


def product_barrier(field: ObstacleField, state: PlanningState, goal: GoalPosition) -> float:
    """Composite barrier B_M = prod_i sigma_ki(B_i) at the current state."""
    pose = world_from_state(state, goal)
    value = 1.0
    for obstacle, kappa in zip(field.obstacles, field.kappas):
        value *= saturate_scaled(barrier(obstacle, pose), kappa)
    return value


def product_row(
    field: ObstacleField,
    state: PlanningState,
    goal: GoalPosition,
    r_min: float = R_MIN,
) -> CbfRow:
    """Constraint row of the composite barrier via the product rule.

    Each term scales that obstacle's row by sigma'(B_i / kappa_i) / kappa_i
    times the product of every other factor; prefix/suffix products avoid
    dividing by factors that sit exactly at zero on an obstacle boundary.
    """
    m = len(field.obstacles)
    if m == 0:
        return CbfRow(0.0, 0.0)
    pose = world_from_state(state, goal)
    values = [barrier(o, pose) for o in field.obstacles]
    factors = [saturate_scaled(v, k) for v, k in zip(values, field.kappas)]

    prefix = [1.0] * (m + 1)
    for i in range(m):
        prefix[i + 1] = prefix[i] * factors[i]
    suffix = [1.0] * (m + 1)
    for i in range(m - 1, -1, -1):
        suffix[i] = suffix[i + 1] * factors[i]

    d_x = d_y = 0.0
    for i, (obstacle, kappa) in enumerate(zip(field.obstacles, field.kappas)):
        slope = saturate_scaled_deriv(values[i], kappa)
        if slope == 0.0:
            continue
        weight = slope * prefix[i] * suffix[i + 1]
        row_i = cbf_row(obstacle, state, goal, r_min)
        d_x += weight * row_i.d_x
        d_y += weight * row_i.d_y
    return CbfRow(d_x, d_y)
