from __future__ import annotations

import numpy as np
import pytest

from app.schemas.robot import StanceLeg
from app.services.dynamics.chain_terms_service import COM_ROW, ROWS, foot_row, planar_chain
from app.services.dynamics.planar_dynamics_service import (
    NQ,
    POINTS,
    UnknownPointError,
    angular_momentum_about,
    bias_forces,
    kinetic_energy,
    mass_matrix,
    point_bias_acceleration,
    point_jacobian,
    point_position,
    point_velocity,
)


def _states(rng, n):
    lo = np.array([-1.0, -1.0, -0.5, -1.0, -1.0, -1.0, -1.0])
    return [(rng.uniform(lo, -lo), rng.uniform(-2.0, 2.0, NQ)) for _ in range(n)]


def test_mass_matrix_and_bias_match_recursive_algorithms(robot, rng):
    chain = planar_chain(robot)
    for q, qd in _states(rng, 50):
        terms = chain.evaluate(q, qd)
        M = mass_matrix(robot, q)
        c = bias_forces(robot, q, qd)
        assert np.abs(terms.mass_matrix - M).max() <= 1e-10 * max(1.0, np.abs(M).max())
        assert np.abs(terms.bias_forces - c).max() <= 1e-10 * max(1.0, np.abs(c).max())


def test_point_terms_match_reference_kinematics(robot, rng):
    chain = planar_chain(robot)
    for q, qd in _states(rng, 20):
        terms = chain.evaluate(q, qd)
        for name in POINTS:
            row = ROWS[name]
            assert np.allclose(terms.positions[row], point_position(robot, q, name), atol=1e-12), name
            assert np.allclose(terms.jacobians[row], point_jacobian(robot, q, name), atol=1e-12), name
            assert np.allclose(terms.velocities[row], point_velocity(robot, q, qd, name), atol=1e-12), name
            assert np.allclose(terms.bias_accelerations[row], point_bias_acceleration(robot, q, qd, name), atol=1e-10), name
        assert np.allclose(chain.positions(q), terms.positions)
        assert np.allclose(chain.jacobians(q), terms.jacobians)


def test_momentum_and_energy_match_reference(robot, rng):
    chain = planar_chain(robot)
    for q, qd in _states(rng, 10):
        terms = chain.evaluate(q, qd)
        point = rng.uniform(-1.0, 1.0, 2)
        assert terms.angular_momentum_about(point) == pytest.approx(angular_momentum_about(robot, q, qd, point), rel=1e-10, abs=1e-10)
        assert terms.kinetic_energy() == pytest.approx(kinetic_energy(robot, q, qd), rel=1e-10)


def test_chain_is_cached_per_model(robot):
    assert planar_chain(robot) is planar_chain(robot)
    assert planar_chain(robot).total_mass == pytest.approx(robot.total_mass)
    assert foot_row(StanceLeg.LEFT) == ROWS["left_foot"]
    assert foot_row(StanceLeg.RIGHT) == ROWS["right_foot"]
    assert ROWS["com"] == COM_ROW


def test_unknown_row_is_rejected(robot):
    terms = planar_chain(robot).evaluate(np.zeros(NQ), np.zeros(NQ))
    assert terms.row("hip") == ROWS["hip"]
    with pytest.raises(UnknownPointError):
        terms.row("elbow")
