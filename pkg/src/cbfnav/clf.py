"""Goal-seeking Lyapunov function and its closed-form reference controller.

The Lyapunov function weights range against bearing error,

    V(x) = (r^2 + gamma^2 sin^2(beta * delta)) / 2,

which penalizes lateral correction more gently than range and shapes a
forward field of view through beta.  Differentiating V through the input
matrix g(x) gives the constraint row

    L_gV = (a_x, a_y, a_omega)
    a_x     = -r cos(delta) + beta gamma^2 sin(2 beta delta) sin(delta) / (2 r)
    a_y     = -r sin(delta) - beta gamma^2 sin(2 beta delta) cos(delta) / (2 r)
    a_omega =  beta gamma^2 sin(2 beta delta) / 2.

An alternate convention writes a_omega with gamma to the first power; the
gradient-consistent gamma^2 form is the default and the other is available
via ``ClfParams.omega_gamma_squared``.

The reference controller is the closed-form minimizer used without
obstacles: with feedback speeds

    v_r     = k_r1 r / (k_r2 + r)
    v_delta = -(2 / beta) k_d1 r / (k_d2 + r) sin(2 beta delta)

the commanded input is

    omega_ref = r cos(delta) (r v_delta cos(delta) - v_r sin(delta)) / (alpha + r^2 cos^2(delta))
    v_y_ref   = alpha (v_r sin(delta) - r v_delta cos(delta)) / (alpha + r^2 cos^2(delta))
    v_x_ref   = (v_r cos(delta) r^2 + alpha v_delta sin(delta) r + alpha v_r cos(delta))
                / (alpha + r^2 cos^2(delta)).

For |delta| < pi/2 (inside the field of view) the signs are pinned:
v_y_ref and a_omega carry the sign of delta, omega_ref and a_y the opposite,
and all four vanish exactly at delta = 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .planning import R_MIN, ControlInput, DomainError, PlanningState


@dataclass(frozen=True)
class ClfParams:
    """Weights and gains of the Lyapunov function and reference controller.

    All parameters must be strictly positive.  beta > 1/2 keeps V well
    defined but voids the sign structure the equilibrium analysis relies on
    (it needs |beta * delta| <= pi/2 over the whole bearing range), so that
    case draws a warning rather than an error.
    """

    gamma: float = 1.0
    beta: float = 0.5
    alpha: float = 1.0
    k_r1: float = 1.0
    k_r2: float = 1.0
    k_d1: float = 1.0
    k_d2: float = 1.0
    omega_gamma_squared: bool = True

    def __post_init__(self) -> None:
        for name in ("gamma", "beta", "alpha", "k_r1", "k_r2", "k_d1", "k_d2"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"ClfParams.{name} must be positive, got {value!r}")
        if self.beta > 0.5:
            warnings.warn(
                f"beta={self.beta!r} > 0.5: sign guarantees of the bearing terms "
                "no longer hold over the full bearing range",
                stacklevel=2,
            )


@dataclass(frozen=True)
class ClfRow:
    """Constraint row L_gV; (a_y, a_omega) vanish together exactly at delta = 0."""

    a_x: float
    a_y: float
    a_omega: float

    def dot(self, u: ControlInput) -> float:
        return self.a_x * u.v_x + self.a_y * u.v_y + self.a_omega * u.omega


def lyapunov(state: PlanningState, params: ClfParams) -> float:
    """V(x) >= 0, zero exactly at the goal with zero bearing error."""
    s = params.gamma * math.sin(params.beta * state.delta)
    return 0.5 * (state.r * state.r + s * s)


def clf_row(state: PlanningState, params: ClfParams, r_min: float = R_MIN) -> ClfRow:
    """Row vector L_gV(x) of the Lyapunov constraint."""
    if state.r <= r_min:
        raise DomainError(f"range r={state.r!r} at or below singular guard {r_min!r}")
    r, delta = state.r, state.delta
    s, c = math.sin(delta), math.cos(delta)
    g2 = params.gamma * params.gamma
    half_sin2 = 0.5 * params.beta * math.sin(2.0 * params.beta * delta)
    a_x = -r * c + g2 * half_sin2 * s / r
    a_y = -r * s - g2 * half_sin2 * c / r
    a_omega = (g2 if params.omega_gamma_squared else params.gamma) * half_sin2
    return ClfRow(a_x, a_y, a_omega)


def reference_control(state: PlanningState, params: ClfParams, r_min: float = R_MIN) -> ControlInput:
    """Closed-form obstacle-free reference command for the current state."""
    if state.r <= r_min:
        raise DomainError(f"range r={state.r!r} at or below singular guard {r_min!r}")
    r, delta = state.r, state.delta
    s, c = math.sin(delta), math.cos(delta)

    v_r = params.k_r1 * r / (params.k_r2 + r)
    v_delta = -(2.0 / params.beta) * params.k_d1 * r / (params.k_d2 + r) * math.sin(
        2.0 * params.beta * delta
    )

    den = params.alpha + r * r * c * c
    omega_ref = r * c * (r * v_delta * c - v_r * s) / den
    v_y_ref = params.alpha * (v_r * s - r * v_delta * c) / den
    v_x_ref = (v_r * c * r * r + params.alpha * v_delta * s * r + params.alpha * v_r * c) / den
    return ControlInput(v_x_ref, v_y_ref, omega_ref)
