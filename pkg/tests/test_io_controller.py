from __future__ import annotations

import numpy as np
import pytest

from app.schemas.scenario import ControlGains
from app.services.dynamics.planar_dynamics_service import ACTUATION, NQ, bias_forces, mass_matrix, point_bias_acceleration, point_jacobian
from app.services.hybrid_sim_service import initialize_full_state
from app.services.io_controller_service import (
    OUTPUT_NAMES,
    constrained_dynamics,
    control_outputs,
    io_linearizing_control,
    io_linearizing_torque,
    linearization_residual,
    output_error,
)
from app.services.pattern_generator_service import PatternGenerator, desired


@pytest.fixture
def stance_setup(robot, case_a_gait):
    surface = case_a_gait.gait.surface
    state = initialize_full_state(robot, case_a_gait, surface)
    pg = PatternGenerator(robot, case_a_gait)
    pg.start_step(state.t, state)
    return state, pg, surface


def test_constrained_accelerations_keep_foot_on_surface(robot, stance_setup, rng):
    state, _, surface = stance_setup
    t = 0.07
    cd = constrained_dynamics(robot, state.q, state.qdot, t, surface, state.stance)
    tau = rng.uniform(-50.0, 50.0, 4)
    qdd = cd.accelerations(tau)
    foot = "left_foot"
    J = point_jacobian(robot, state.q, foot)
    acc = J @ qdd + point_bias_acceleration(robot, state.q, state.qdot, foot)
    assert np.allclose(acc, [surface.acceleration(t), 0.0], atol=1e-9)

    f = cd.contact_force(tau)
    lhs = mass_matrix(robot, state.q) @ qdd + bias_forces(robot, state.q, state.qdot)
    assert np.allclose(lhs, ACTUATION @ tau + J.T @ f, atol=1e-8)


def test_output_jacobian_matches_finite_differences(robot, stance_setup):
    state, _, _ = stance_setup
    _, H = control_outputs(robot, state.q, state.stance)
    eps = 1e-6
    fd = np.zeros_like(H)
    for k in range(NQ):
        dq = np.zeros(NQ)
        dq[k] = eps
        fd[:, k] = (control_outputs(robot, state.q + dq, state.stance)[0] - control_outputs(robot, state.q - dq, state.stance)[0]) / (2 * eps)
    assert np.allclose(H, fd, atol=1e-7)
    assert len(OUTPUT_NAMES) == 4


def test_linearizing_torque_gives_pd_output_dynamics(robot, stance_setup):
    state, pg, surface = stance_setup
    gains = ControlGains()
    for t in (0.0, 0.1, 0.25):
        traj = desired(pg.snapshot(), t)
        res = io_linearizing_control(robot, state.q, state.qdot, t, traj, gains, state.stance, surface)
        assert res.linearization_residual < 1e-8
        assert res.constraint_residual < 1e-8
        assert np.allclose(res.v, -gains.kp * res.y - gains.kd * res.ydot)
        assert linearization_residual(robot, state.q, state.qdot, t, traj, gains, state.stance, surface) < 1e-8
        assert np.allclose(io_linearizing_torque(robot, state.q, state.qdot, t, traj, gains, state.stance, surface), res.tau)


def test_initial_state_starts_on_the_desired_outputs(robot, stance_setup):
    state, pg, _ = stance_setup
    traj = desired(pg.snapshot(), state.t)
    y, ydot = output_error(robot, state.q, state.qdot, state.stance, traj)
    assert np.allclose(y, 0.0, atol=1e-8)
    assert np.allclose(ydot[[0, 1, 3]], 0.0, atol=1e-8)


def test_joint_solve_agrees_with_eliminated_dynamics(robot, stance_setup):
    state, pg, surface = stance_setup
    gains = ControlGains()
    t = 0.13
    traj = desired(pg.snapshot(), t)
    res = io_linearizing_control(robot, state.q, state.qdot, t, traj, gains, state.stance, surface)
    cd = constrained_dynamics(robot, state.q, state.qdot, t, surface, state.stance)
    assert np.allclose(res.qddot, cd.accelerations(res.tau), atol=1e-8)
    assert np.allclose(res.contact_force, cd.contact_force(res.tau), atol=1e-6)
    assert np.isfinite(res.decoupling_cond) and res.decoupling_cond > 1.0

    quick = io_linearizing_control(robot, state.q, state.qdot, t, traj, gains, state.stance, surface, check=False)
    assert np.isnan(quick.decoupling_cond)
    assert np.allclose(quick.tau, res.tau, rtol=1e-12, atol=1e-12)
