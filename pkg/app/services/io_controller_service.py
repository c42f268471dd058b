"""Constrained stance dynamics and the input-output linearizing controller.

Stance contact:  J q'' + Jdot q' = p''_S(t),  M q'' + c = B tau + J^T f.
Eliminating f:   M q'' + cbar = Bbar tau with Lambda = (J M^-1 J^T)^-1,
    cbar = c - J^T Lambda (J M^-1 c - Jdot q' + p''_S)
    Bbar = B - J^T Lambda J M^-1 B.
Outputs y = h_c(q) - h_d(s), h_c = [z_CoM, theta, x_sw, z_sw] relative to the
stance foot (theta absolute). The torque makes y'' = v = -Kp y - Kd y'.

The controller solves dynamics, contact and output equations together as one
13x13 system in (q'', f, tau); the eliminated form above backs the decoupling
check and `linearization_residual`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from app.core.errors import NumericalError
from app.schemas.gait import SurfaceMotion
from app.schemas.robot import RobotModel, StanceLeg
from app.schemas.scenario import ControlGains
from app.services.dynamics.chain_terms_service import COM_ROW, ChainTerms, foot_row, planar_chain
from app.services.dynamics.planar_dynamics_service import ACTUATION, N_ACTUATED, NQ
from app.services.pattern_generator_service import DesiredTrajectory

logger = logging.getLogger(__name__)

OUTPUT_NAMES = ("com_height", "trunk_pitch", "swing_x", "swing_z")
CONDITION_LIMIT = 1e10

_THETA_ROW = np.eye(NQ)[2]
_N_SYSTEM = NQ + 2 + N_ACTUATED


class SingularConfigurationError(NumericalError):
    pass


class DecouplingError(NumericalError):
    def __init__(self, message: str, output: str):
        super().__init__(message)
        self.output = output


def _output_terms(terms: ChainTerms, stance: StanceLeg) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    P, J, a = terms.positions, terms.jacobians, terms.bias_accelerations
    st, sw = foot_row(stance), foot_row(stance.other)
    h = np.array([P[COM_ROW, 1] - P[st, 1], terms.q[2], P[sw, 0] - P[st, 0], P[sw, 1] - P[st, 1]])
    H = np.empty((4, NQ))
    H[0] = J[COM_ROW, 1] - J[st, 1]
    H[1] = _THETA_ROW
    H[2] = J[sw, 0] - J[st, 0]
    H[3] = J[sw, 1] - J[st, 1]
    Hdot_qdot = np.array([a[COM_ROW, 1] - a[st, 1], 0.0, a[sw, 0] - a[st, 0], a[sw, 1] - a[st, 1]])
    return h, H, Hdot_qdot


def control_outputs(model: RobotModel, q, stance: StanceLeg) -> Tuple[np.ndarray, np.ndarray]:
    """h_c(q) and its 4x7 Jacobian."""
    q = np.asarray(q, dtype=float)
    h, H, _ = _output_terms(planar_chain(model).evaluate(q, np.zeros(NQ)), stance)
    return h, H


def output_bias(model: RobotModel, q, qdot, stance: StanceLeg) -> np.ndarray:
    """Hdot q' (second derivative of h_c when q'' = 0)."""
    terms = planar_chain(model).evaluate(np.asarray(q, dtype=float), np.asarray(qdot, dtype=float))
    return _output_terms(terms, stance)[2]


@dataclass(frozen=True)
class ConstrainedDynamics:
    M: np.ndarray
    c: np.ndarray
    c_bar: np.ndarray
    B_bar: np.ndarray
    J: np.ndarray
    Jdot_qdot: np.ndarray
    Lambda: np.ndarray
    surface_accel: np.ndarray
    # Cholesky factor of M
    factor: tuple

    def solve_m(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self.factor, rhs, check_finite=False)

    def accelerations(self, tau: np.ndarray) -> np.ndarray:
        return self.solve_m(self.B_bar @ tau - self.c_bar)

    def contact_force(self, tau: np.ndarray) -> np.ndarray:
        m_inv_rhs = self.solve_m(ACTUATION @ tau - self.c)
        return self.Lambda @ (self.surface_accel - self.Jdot_qdot - self.J @ m_inv_rhs)


def _symmetric_2x2_cond(a: np.ndarray) -> float:
    mean = 0.5 * (a[0, 0] + a[1, 1])
    spread = math.hypot(0.5 * (a[0, 0] - a[1, 1]), a[0, 1])
    low = mean - spread
    return (mean + spread) / low if low > 0.0 else math.inf


def _constrained(terms: ChainTerms, stance: StanceLeg, p_dd: np.ndarray, t: float) -> ConstrainedDynamics:
    row = foot_row(stance)
    M, c = terms.mass_matrix, terms.bias_forces
    J, b = terms.jacobians[row], terms.bias_accelerations[row]

    factor = cho_factor(M, check_finite=False)
    # columns: J^T (2) | B (4) | c (1)
    solved = cho_solve(factor, np.column_stack((J.T, ACTUATION, c)), check_finite=False)
    M_inv_JT, M_inv_B, M_inv_c = solved[:, :2], solved[:, 2:6], solved[:, 6]
    contact_inertia = J @ M_inv_JT
    cond = _symmetric_2x2_cond(contact_inertia)
    if not cond < CONDITION_LIMIT:
        raise SingularConfigurationError(f"stance constraint inertia is singular (cond {cond:.3g}) at t={t:.6f}")
    (a, b01), (_, d) = contact_inertia
    Lam = np.array([[d, -b01], [-b01, a]]) / (a * d - b01 * b01)

    c_bar = c - J.T @ (Lam @ (J @ M_inv_c - b + p_dd))
    B_bar = ACTUATION - J.T @ (Lam @ (J @ M_inv_B))
    return ConstrainedDynamics(
        M=M, c=c, c_bar=c_bar, B_bar=B_bar, J=J, Jdot_qdot=b, Lambda=Lam, surface_accel=p_dd, factor=factor
    )


def constrained_dynamics(
    model: RobotModel,
    q,
    qdot,
    t: float,
    surface: SurfaceMotion,
    stance: StanceLeg,
) -> ConstrainedDynamics:
    terms = planar_chain(model).evaluate(np.asarray(q, dtype=float), np.asarray(qdot, dtype=float))
    p_dd = np.array([float(surface.acceleration(t)), 0.0])
    return _constrained(terms, stance, p_dd, t)


def output_error(model: RobotModel, q, qdot, stance: StanceLeg, traj: DesiredTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    h, H = control_outputs(model, q, stance)
    return h - traj.h, H @ np.asarray(qdot, dtype=float) - traj.hdot


@dataclass(frozen=True)
class ControlResult:
    tau: np.ndarray
    qddot: np.ndarray
    contact_force: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    v: np.ndarray
    yddot: np.ndarray
    # nan when the decoupling check was skipped
    decoupling_cond: float
    constraint_residual: float

    @property
    def linearization_residual(self) -> float:
        return float(np.linalg.norm(self.yddot - self.v) / (1.0 + np.linalg.norm(self.v)))


def _decoupling_failure(D: np.ndarray) -> str:
    U, _, _ = np.linalg.svd(D)
    return OUTPUT_NAMES[int(np.argmax(np.abs(U[:, -1])))]


def check_decoupling(terms: ChainTerms, H: np.ndarray, stance: StanceLeg, p_dd: np.ndarray, t: float) -> float:
    """cond(D) of D = H M^-1 Bbar; raises DecouplingError naming the weakest output."""
    cd = _constrained(terms, stance, p_dd, t)
    D = H @ cd.solve_m(cd.B_bar)
    cond = float(np.linalg.cond(D))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        name = _decoupling_failure(D)
        logger.debug("decoupling check failed at t=%.6f: cond %.3g, stance %s", t, cond, stance.value)
        raise DecouplingError(f"decoupling matrix singular (cond {cond:.3g}) in output '{name}' at t={t:.6f}", name)
    return cond


def io_linearizing_control(
    model: RobotModel,
    q,
    qdot,
    t: float,
    traj: DesiredTrajectory,
    gains: ControlGains,
    stance: StanceLeg,
    surface: SurfaceMotion,
    *,
    check: bool = True,
) -> ControlResult:
    """Linearizing torque plus the closed-loop accelerations and contact force it produces.

    With check=False the decoupling-matrix condition number is not computed.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    terms = planar_chain(model).evaluate(q, qdot)
    h, H, Hdot_qdot = _output_terms(terms, stance)

    y = h - traj.h
    ydot = H @ qdot - traj.hdot
    v = -gains.kp * y - gains.kd * ydot
    p_dd = np.array([float(surface.acceleration(t)), 0.0])
    cond = check_decoupling(terms, H, stance, p_dd, t) if check else math.nan

    row = foot_row(stance)
    J, b = terms.jacobians[row], terms.bias_accelerations[row]
    K = np.zeros((_N_SYSTEM, _N_SYSTEM))
    K[:NQ, :NQ] = terms.mass_matrix
    K[:NQ, NQ : NQ + 2] = -J.T
    K[:NQ, NQ + 2 :] = -ACTUATION
    K[NQ : NQ + 2, :NQ] = J
    K[NQ + 2 :, :NQ] = H
    rhs = np.concatenate((-terms.bias_forces, p_dd - b, v - Hdot_qdot + traj.hddot))
    sol = np.linalg.solve(K, rhs)
    qddot, force, tau = sol[:NQ], sol[NQ : NQ + 2], sol[NQ + 2 :]

    yddot = H @ qddot + Hdot_qdot - traj.hddot
    return ControlResult(
        tau=tau,
        qddot=qddot,
        contact_force=force,
        y=y,
        ydot=ydot,
        v=v,
        yddot=yddot,
        decoupling_cond=cond,
        constraint_residual=float(np.linalg.norm(J @ qddot + b - p_dd)),
    )


def io_linearizing_torque(
    model: RobotModel,
    q,
    qdot,
    t: float,
    traj: DesiredTrajectory,
    gains: ControlGains,
    stance: StanceLeg,
    surface: SurfaceMotion,
) -> np.ndarray:
    return io_linearizing_control(model, q, qdot, t, traj, gains, stance, surface).tau


def linearization_residual(
    model: RobotModel,
    q,
    qdot,
    t: float,
    traj: DesiredTrajectory,
    gains: ControlGains,
    stance: StanceLeg,
    surface: SurfaceMotion,
) -> float:
    """|y'' - v| / (1 + |v|) with y'' recomputed from the eliminated dynamics under the returned torque."""
    res = io_linearizing_control(model, q, qdot, t, traj, gains, stance, surface)
    cd = constrained_dynamics(model, q, qdot, t, surface, stance)
    qddot = cd.accelerations(res.tau)
    _, H = control_outputs(model, q, stance)
    yddot = H @ qddot + output_bias(model, q, qdot, stance) - traj.hddot
    return float(np.linalg.norm(yddot - res.v) / (1.0 + np.linalg.norm(res.v)))
