"""Step-to-step linear inverted pendulum robot used by the simulator.

Each walking step of duration tau advances the per-axis pendulum state
(position, velocity) through the hyperbolic transition

    [x_{k+1}; xdot_{k+1}] = [cosh(xi)      sinh(xi)/rho] [x_k; xdot_k]
                            [rho sinh(xi)  cosh(xi)    ]
                          + [1 - cosh(xi); -rho sinh(xi)] p

with rho = sqrt(g / H), xi = rho tau, and p the commanded contact point on
that axis.  Standing still (x = p, xdot = 0) is a fixed point and the
transition matrix has unit determinant.

The commanded velocities from the safety filter are tracked with a one-step
deadbeat placement: solving the velocity row for p makes the axis velocity
equal the command exactly at the end of the step.  A whole-body step applies
that placement per body axis, translates the pose by the resulting CoM
displacement rotated into the world frame, then rotates the heading by
-omega tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .planning import ControlInput, WorldPose, wrap_angle


@dataclass(frozen=True)
class AlipParams:
    """Gravity, CoM height, and swing duration; rho and xi are derived."""

    gravity: float = 9.81
    com_height: float = 1.0
    tau: float = 0.3

    def __post_init__(self) -> None:
        for name in ("gravity", "com_height", "tau"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"AlipParams.{name} must be positive, got {value!r}")

    @property
    def rho(self) -> float:
        return math.sqrt(self.gravity / self.com_height)

    @property
    def xi(self) -> float:
        return self.rho * self.tau


@dataclass(frozen=True)
class AlipAxisState:
    """Pendulum state on one axis: CoM coordinate and velocity."""

    pos: float = 0.0
    vel: float = 0.0


def axis_step(state: AlipAxisState, placement: float, params: AlipParams) -> AlipAxisState:
    """Advance one axis through a single swing with contact point ``placement``."""
    ch, sh = math.cosh(params.xi), math.sinh(params.xi)
    rho = params.rho
    return AlipAxisState(
        ch * state.pos + sh / rho * state.vel + (1.0 - ch) * placement,
        rho * sh * state.pos + ch * state.vel - rho * sh * placement,
    )


def placement_for_velocity(state: AlipAxisState, v_des: float, params: AlipParams) -> float:
    """Contact point making the end-of-step axis velocity equal ``v_des``."""
    ch, sh = math.cosh(params.xi), math.sinh(params.xi)
    rho = params.rho
    return (rho * sh * state.pos + ch * state.vel - v_des) / (rho * sh)


def alip_step(
    pose: WorldPose,
    axis_x: AlipAxisState,
    axis_y: AlipAxisState,
    u: ControlInput,
    params: AlipParams,
) -> tuple[WorldPose, AlipAxisState, AlipAxisState]:
    """One whole-body step tracking the commanded robot-frame velocities.

    Axis states live in the body frame with the CoM rebased to the origin at
    the start of every step, so the post-step axis positions are the body
    displacement directly.  The pose translates by that displacement rotated
    through the pre-step heading; the heading then turns by -omega tau.
    """
    start_x = AlipAxisState(0.0, axis_x.vel)
    start_y = AlipAxisState(0.0, axis_y.vel)
    next_x = axis_step(start_x, placement_for_velocity(start_x, u.v_x, params), params)
    next_y = axis_step(start_y, placement_for_velocity(start_y, u.v_y, params), params)

    c, s = math.cos(pose.theta), math.sin(pose.theta)
    moved = WorldPose(
        pose.x + c * next_x.pos - s * next_y.pos,
        pose.y + s * next_x.pos + c * next_y.pos,
        wrap_angle(pose.theta - u.omega * params.tau),
    )
    return moved, AlipAxisState(0.0, next_x.vel), AlipAxisState(0.0, next_y.vel)
