"""Polar planning model: goal-relative state, kinematics, and pose conversions.

The robot is a planar body commanded by sagittal velocity v_x, lateral
velocity v_y, and turn rate omega, all in the robot frame.  Planning happens
in goal-relative polar coordinates x = (r, delta, theta):

    r      range to the active goal (m, positive),
    delta  bearing error between the heading and the line of sight (rad),
    theta  heading (rad).

The control system is driftless, ``xdot = g(x) u`` with

    g(x) = [ -cos(delta)      -sin(delta)      0 ]
           [  sin(delta)/r    -cos(delta)/r    1 ]
           [  0                0              -1 ]

so positive v_x with delta = 0 walks straight at the goal and positive omega
decreases the heading.  World coordinates are derived, not integrated: the
robot position is reconstructed from the polar state as
``(x_t - r cos(delta + theta), y_t - r sin(delta + theta))`` about the goal
``(x_t, y_t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

#: Singular guard on the range coordinate; g(x) has 1/r entries.
R_MIN = 1e-6

#: Range below which the active goal counts as reached.
R_GOAL = 0.05


class DomainError(ValueError):
    """State outside the model's valid domain (r at or below the singular guard)."""


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class PlanningState:
    """Goal-relative polar state (r, delta, theta).

    Angles are wrapped to (-pi, pi] on construction, so states coming out of
    an integrator step or a pose conversion always satisfy the invariant.
    """

    r: float
    delta: float
    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta", wrap_angle(self.delta))
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class ControlInput:
    """Robot-frame command: sagittal velocity, lateral velocity, turn rate."""

    v_x: float
    v_y: float
    omega: float

    def norm(self) -> float:
        return math.sqrt(self.v_x**2 + self.v_y**2 + self.omega**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.v_x, self.v_y, self.omega])


ZERO_CONTROL = ControlInput(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class WorldPose:
    """World-frame pose; heading wrapped to (-pi, pi] on construction."""

    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class GoalPosition:
    """World-frame goal point."""

    x: float
    y: float


def control_matrix(state: PlanningState, r_min: float = R_MIN) -> np.ndarray:
    """Input matrix g(x) of the driftless control system.

    det(g) = -1/r, so the model is singular at the goal; raises DomainError
    for r <= r_min.
    """
    if state.r <= r_min:
        raise DomainError(f"range r={state.r!r} at or below singular guard {r_min!r}")
    s, c = math.sin(state.delta), math.cos(state.delta)
    return np.array(
        [
            [-c, -s, 0.0],
            [s / state.r, -c / state.r, 1.0],
            [0.0, 0.0, -1.0],
        ]
    )


def _derivative(r: float, delta: float, u: ControlInput, r_min: float) -> tuple[float, float, float]:
    # Unchecked core shared with the integrator; clamps r so intermediate
    # integration stages just short of the goal stay evaluable.
    r = max(r, r_min)
    s, c = math.sin(delta), math.cos(delta)
    dr = -c * u.v_x - s * u.v_y
    ddelta = (s * u.v_x - c * u.v_y) / r + u.omega
    dtheta = -u.omega
    return dr, ddelta, dtheta


def state_derivative(state: PlanningState, u: ControlInput, r_min: float = R_MIN) -> np.ndarray:
    """Time derivative g(x) u of the polar state (the drift term is zero)."""
    if state.r <= r_min:
        raise DomainError(f"range r={state.r!r} at or below singular guard {r_min!r}")
    return np.array(_derivative(state.r, state.delta, u, r_min))


def world_from_state(state: PlanningState, goal: GoalPosition) -> WorldPose:
    """Reconstruct the world pose from the polar state about ``goal``."""
    los = state.delta + state.theta
    return WorldPose(
        goal.x - state.r * math.cos(los),
        goal.y - state.r * math.sin(los),
        state.theta,
    )


def state_from_world(pose: WorldPose, goal: GoalPosition, r_min: float = R_MIN) -> PlanningState:
    """Polar state of ``pose`` relative to ``goal``.

    The bearing error is chosen so that ``world_from_state`` inverts this
    exactly: delta = wrap(atan2(goal - position) - heading).
    """
    dx = goal.x - pose.x
    dy = goal.y - pose.y
    r = math.hypot(dx, dy)
    if r < r_min:
        raise DomainError(f"pose coincides with the goal (r={r!r} < {r_min!r})")
    delta = wrap_angle(math.atan2(dy, dx) - pose.theta)
    return PlanningState(r, delta, pose.theta)


def integrate_step(
    state: PlanningState,
    u: ControlInput,
    dt: float,
    r_min: float = R_MIN,
) -> PlanningState:
    """One classical RK4 step of the polar dynamics under constant input.

    Angles are re-wrapped at the end of the step only; wrapping inside the
    stages would break the smoothness RK4 relies on.  If the step would carry
    r below the singular guard, r is clamped at r_min (the caller decides
    whether that means the goal was reached).
    """
    if state.r <= r_min:
        raise DomainError(f"range r={state.r!r} at or below singular guard {r_min!r}")
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")

    r0, d0, t0 = state.r, state.delta, state.theta
    k1 = _derivative(r0, d0, u, r_min)
    k2 = _derivative(r0 + 0.5 * dt * k1[0], d0 + 0.5 * dt * k1[1], u, r_min)
    k3 = _derivative(r0 + 0.5 * dt * k2[0], d0 + 0.5 * dt * k2[1], u, r_min)
    k4 = _derivative(r0 + dt * k3[0], d0 + dt * k3[1], u, r_min)

    r1 = r0 + dt * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0
    d1 = d0 + dt * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0
    t1 = t0 - dt * u.omega

    return PlanningState(max(r1, r_min), d1, t1)
