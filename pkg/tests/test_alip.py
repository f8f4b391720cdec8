"""Step-to-step pendulum model: transition, deadbeat placement, whole steps."""

import math

import numpy as np
import pytest

from cbfnav.alip import (
    AlipAxisState,
    AlipParams,
    alip_step,
    axis_step,
    placement_for_velocity,
)
from cbfnav.planning import ControlInput, GoalPosition, WorldPose
from cbfnav.runner import Scenario, run


def test_params_and_derived_constants():
    params = AlipParams()
    assert params.rho == pytest.approx(math.sqrt(9.81), rel=1e-12)
    assert params.rho == pytest.approx(3.1321, abs=1e-4)
    assert params.xi == pytest.approx(0.93962, abs=1e-5)
    # cosh from exponentials, independent of math.cosh
    expected = 0.5 * (math.exp(params.xi) + math.exp(-params.xi))
    assert math.cosh(params.xi) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(1.4749, abs=1e-4)
    with pytest.raises(ValueError):
        AlipParams(tau=0.0)


def test_standing_fixed_point():
    params = AlipParams()
    state = AlipAxisState(0.37, 0.0)
    stepped = axis_step(state, 0.37, params)
    assert stepped.pos == pytest.approx(0.37, abs=1e-15)
    assert stepped.vel == pytest.approx(0.0, abs=1e-14)


def test_transition_determinant_is_one():
    for tau in (0.1, 0.3, 0.7):
        params = AlipParams(tau=tau)
        ch, sh = math.cosh(params.xi), math.sinh(params.xi)
        matrix = np.array([[ch, sh / params.rho], [params.rho * sh, ch]])
        assert abs(np.linalg.det(matrix) - 1.0) <= 1e-12


def test_placement_examples():
    params = AlipParams()
    # standing at the contact point, commanding zero velocity: stay put
    assert placement_for_velocity(AlipAxisState(0.2, 0.0), 0.0, params) == pytest.approx(0.2)
    assert placement_for_velocity(AlipAxisState(0.0, 0.0), 0.0, params) == 0.0


def test_placement_is_velocity_deadbeat():
    params = AlipParams()
    rng = np.random.default_rng(41)
    for _ in range(200):
        state = AlipAxisState(float(rng.uniform(-1.0, 1.0)), float(rng.uniform(-2.0, 2.0)))
        v_des = float(rng.uniform(-2.0, 2.0))
        placement = placement_for_velocity(state, v_des, params)
        assert axis_step(state, placement, params).vel == pytest.approx(v_des, abs=1e-12)


def test_whole_step_at_rest_with_zero_command():
    params = AlipParams()
    pose = WorldPose(1.0, -2.0, 0.7)
    moved, ax, ay = alip_step(pose, AlipAxisState(), AlipAxisState(), ControlInput(0.0, 0.0, 0.0), params)
    assert moved == pose
    assert ax == AlipAxisState() and ay == AlipAxisState()


def test_whole_step_steady_gait_displacement():
    params = AlipParams()
    v = 0.8
    # after one deadbeat step the axis runs at the commanded velocity; from
    # then on each step covers (2 v / rho) tanh(xi / 2) along the heading
    pose = WorldPose(0.0, 0.0, 0.0)
    ax, ay = AlipAxisState(), AlipAxisState()
    pose, ax, ay = alip_step(pose, ax, ay, ControlInput(v, 0.0, 0.0), params)
    start_x = pose.x
    pose, ax, ay = alip_step(pose, ax, ay, ControlInput(v, 0.0, 0.0), params)
    step_length = pose.x - start_x
    expected = 2.0 * v / params.rho * math.tanh(params.xi / 2.0)
    assert step_length == pytest.approx(expected, rel=1e-12)
    assert step_length == pytest.approx(v * params.tau, rel=0.1)
    assert pose.y == 0.0 and pose.theta == 0.0


def test_whole_step_full_revolution_turn():
    params = AlipParams()
    pose = WorldPose(0.0, 0.0, 0.4)
    omega = 2.0 * math.pi / params.tau
    moved, _, _ = alip_step(pose, AlipAxisState(), AlipAxisState(), ControlInput(0.0, 0.0, omega), params)
    assert moved.theta == pytest.approx(0.4, abs=1e-12)


def test_turn_rate_decreases_heading():
    params = AlipParams()
    pose = WorldPose(0.0, 0.0, 0.0)
    moved, _, _ = alip_step(pose, AlipAxisState(), AlipAxisState(), ControlInput(0.0, 0.0, 1.0), params)
    assert moved.theta == pytest.approx(-params.tau)


def _endpoint_gap(tau: float, horizon: float) -> float:
    """Endpoint distance between the two integrators after a fixed horizon."""
    steps = int(round(horizon / tau))
    poses = {}
    for integrator in ("kinematic", "alip"):
        scenario = Scenario(
            start=WorldPose(-40.0, 0.0, 0.0),
            goal=GoalPosition(0.0, 0.0),
            integrator=integrator,
            alip=AlipParams(tau=tau),
            step_budget=steps,
        )
        record = run(scenario)
        assert len(record.steps) == steps
        poses[integrator] = record.final_pose
    a, b = poses["kinematic"], poses["alip"]
    return math.hypot(a.x - b.x, a.y - b.y)


def test_integrators_agree_to_first_order_in_step_duration():
    gap_coarse = _endpoint_gap(0.3, 6.0)
    gap_mid = _endpoint_gap(0.15, 6.0)
    gap_fine = _endpoint_gap(0.075, 6.0)
    assert gap_mid <= 0.65 * gap_coarse
    assert gap_fine <= 0.65 * gap_mid
