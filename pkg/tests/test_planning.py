"""Polar model: dynamics matrix, pose conversions, and the RK4 step."""

import math

import numpy as np
import pytest

from cbfnav.planning import (
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


def test_wrap_angle_range():
    for angle in np.linspace(-25.0, 25.0, 1001):
        wrapped = wrap_angle(float(angle))
        assert -math.pi < wrapped <= math.pi
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3.0 * math.pi) == pytest.approx(math.pi)


def test_state_wraps_angles_on_construction():
    state = PlanningState(1.0, 3.0 * math.pi, -5.0 * math.pi / 2.0)
    assert state.delta == pytest.approx(math.pi)
    assert state.theta == pytest.approx(-math.pi / 2.0)
    pose = WorldPose(0.0, 0.0, 2.0 * math.pi)
    assert pose.theta == pytest.approx(0.0)


def test_control_matrix_simple_states():
    g = control_matrix(PlanningState(1.0, 0.0, 0.0))
    assert np.allclose(g, [[-1.0, 0.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -1.0]])

    g = control_matrix(PlanningState(2.0, math.pi / 2.0, 0.3))
    assert np.allclose(g, [[0.0, -1.0, 0.0], [0.5, 0.0, 1.0], [0.0, 0.0, -1.0]], atol=1e-15)


def test_control_matrix_determinant_is_negative_inverse_range():
    rng = np.random.default_rng(3)
    for r in np.exp(rng.uniform(np.log(1e-3), np.log(1e3), 300)):
        state = PlanningState(float(r), float(rng.uniform(-np.pi, np.pi)), 0.0)
        det = np.linalg.det(control_matrix(state))
        assert det == pytest.approx(-1.0 / r, rel=1e-9)


def test_control_matrix_domain_error():
    with pytest.raises(DomainError):
        control_matrix(PlanningState(0.0, 0.0, 0.0))
    with pytest.raises(DomainError):
        state_derivative(PlanningState(1e-9, 0.0, 0.0), ControlInput(1.0, 0.0, 0.0))


def test_state_derivative_zero_control_is_zero():
    rng = np.random.default_rng(4)
    for _ in range(50):
        state = PlanningState(
            float(rng.uniform(0.1, 10.0)),
            float(rng.uniform(-np.pi, np.pi)),
            float(rng.uniform(-np.pi, np.pi)),
        )
        assert np.all(state_derivative(state, ControlInput(0.0, 0.0, 0.0)) == 0.0)


def test_state_derivative_straight_approach():
    deriv = state_derivative(PlanningState(1.0, 0.0, 0.0), ControlInput(1.0, 0.0, 0.0))
    assert np.allclose(deriv, [-1.0, 0.0, 0.0])


def test_state_derivative_matches_short_integration():
    rng = np.random.default_rng(5)
    h = 1e-6
    for _ in range(100):
        state = PlanningState(
            float(rng.uniform(0.3, 20.0)),
            float(rng.uniform(-2.9, 2.9)),
            float(rng.uniform(-np.pi, np.pi)),
        )
        u = ControlInput(*rng.uniform(-2.0, 2.0, 3))
        stepped = integrate_step(state, u, h)
        fd = (
            np.array([stepped.r, stepped.delta, stepped.theta])
            - np.array([state.r, state.delta, state.theta])
        ) / h
        assert np.allclose(fd, state_derivative(state, u), atol=1e-4, rtol=1e-4)


def test_world_from_state_examples():
    pose = world_from_state(PlanningState(1.0, 0.0, 0.0), GoalPosition(0.0, 0.0))
    assert (pose.x, pose.y, pose.theta) == pytest.approx((-1.0, 0.0, 0.0))

    near_goal = world_from_state(PlanningState(1e-12, 0.7, 0.3), GoalPosition(2.0, -1.0))
    assert (near_goal.x, near_goal.y) == pytest.approx((2.0, -1.0), abs=1e-11)

    diag = world_from_state(
        PlanningState(math.sqrt(2.0), 0.0, math.pi / 4.0), GoalPosition(0.0, 0.0)
    )
    assert (diag.x, diag.y, diag.theta) == pytest.approx((-1.0, -1.0, math.pi / 4.0))


def test_state_from_world_examples():
    state = state_from_world(WorldPose(-1.0, 0.0, 0.0), GoalPosition(0.0, 0.0))
    assert (state.r, state.delta, state.theta) == pytest.approx((1.0, 0.0, 0.0))

    state = state_from_world(WorldPose(0.0, -1.0, 0.0), GoalPosition(0.0, 0.0))
    assert (state.r, state.delta, state.theta) == pytest.approx((1.0, math.pi / 2.0, 0.0))

    with pytest.raises(DomainError):
        state_from_world(WorldPose(2.0, -1.0, 0.1), GoalPosition(2.0, -1.0))


def test_pose_conversion_round_trip():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        state = PlanningState(
            float(np.exp(rng.uniform(np.log(1e-3), np.log(1e3)))),
            float(rng.uniform(-np.pi, np.pi)),
            float(rng.uniform(-np.pi, np.pi)),
        )
        goal = GoalPosition(*rng.uniform(-50.0, 50.0, 2))
        back = state_from_world(world_from_state(state, goal), goal)
        assert abs(back.r - state.r) <= 1e-12 * max(1.0, state.r)
        assert abs(wrap_angle(back.delta - state.delta)) <= 1e-9
        assert back.theta == state.theta


def test_integrate_step_zero_control_is_identity():
    state = PlanningState(3.0, 0.4, -1.2)
    stepped = integrate_step(state, ControlInput(0.0, 0.0, 0.0), 0.3)
    assert (stepped.r, stepped.delta, stepped.theta) == (state.r, state.delta, state.theta)


def test_integrate_step_straight_decay_is_exact():
    stepped = integrate_step(PlanningState(1.0, 0.0, 0.0), ControlInput(1.0, 0.0, 0.0), 0.1)
    # rdot = -v_x is linear, so RK4 integrates it exactly
    assert stepped.r == pytest.approx(0.9, abs=1e-15)
    assert stepped.delta == 0.0
    assert stepped.theta == 0.0


def test_integrate_step_clamps_at_singular_guard():
    stepped = integrate_step(PlanningState(0.05, 0.0, 0.0), ControlInput(1.0, 0.0, 0.0), 0.2)
    assert stepped.r == 1e-6


def test_integrate_step_rejects_bad_inputs():
    with pytest.raises(ValueError):
        integrate_step(PlanningState(1.0, 0.0, 0.0), ControlInput(0.0, 0.0, 0.0), 0.0)
    with pytest.raises(DomainError):
        integrate_step(PlanningState(1e-7, 0.0, 0.0), ControlInput(0.0, 0.0, 0.0), 0.1)


def _integrate_interval(state, u, total, steps):
    dt = total / steps
    for _ in range(steps):
        state = integrate_step(state, u, dt)
    return np.array([state.r, state.delta, state.theta])


def test_integrate_step_is_fourth_order():
    state = PlanningState(4.0, 0.5, 0.2)
    u = ControlInput(0.7, 0.3, 0.9)
    total = 0.8
    reference = _integrate_interval(state, u, total, 512)
    err_coarse = np.max(np.abs(_integrate_interval(state, u, total, 8) - reference))
    err_fine = np.max(np.abs(_integrate_interval(state, u, total, 16) - reference))
    ratio = err_coarse / err_fine
    assert 10.0 < ratio < 22.0, f"expected ~16x error reduction, got {ratio:.2f}"
