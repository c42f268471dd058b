"""Whole-body terms of the 5-link chain evaluated in one vectorized pass.

Every tracked point (link CoMs, feet, whole-body CoM, hip) is the hip plus a fixed
weighted sum of the five link direction vectors d_j(phi_j), with phi = A q for a
constant angle map A. That gives, for point P with weight row w_P,

    P       = hip + w_P @ D
    dP/dq   = [I2 | 0] + sum_j w_Pj (z x d_j) A_j
    Jdot qd = -w_P @ (omega^2 * D)

and the mass matrix / bias vector from the link-CoM Jacobians:

    M = sum_i m_i Jc_i^T Jc_i + A^T diag(I) A
    c = sum_i m_i Jc_i^T (Jdot_i qd) + g m_total dz_CoM/dq

The stance loop evaluates these terms at every RK4 stage; the recursive
algorithms in planar_dynamics_service remain the reference they are tested against.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np

from app.schemas.robot import RobotModel, StanceLeg
from app.services.dynamics.planar_dynamics_service import (
    LEFT_SHANK,
    LEFT_THIGH,
    NQ,
    RIGHT_SHANK,
    RIGHT_THIGH,
    TRUNK,
    UnknownPointError,
    link_angular_rows,
)

# rows 0-4 are the link CoMs in LINK order
LEFT_FOOT_ROW, RIGHT_FOOT_ROW, COM_ROW, HIP_ROW = 5, 6, 7, 8
N_ROWS = 9
ROWS: Dict[str, int] = {
    "left_foot": LEFT_FOOT_ROW,
    "right_foot": RIGHT_FOOT_ROW,
    "com": COM_ROW,
    "trunk": TRUNK,
    "hip": HIP_ROW,
}

# the trunk points up from the hip, the legs point down
_DIRECTION_SIGN = np.array([-1.0, 1.0, 1.0, 1.0, 1.0])


def foot_row(leg: StanceLeg) -> int:
    return LEFT_FOOT_ROW if leg is StanceLeg.LEFT else RIGHT_FOOT_ROW


@dataclass(frozen=True)
class ChainTerms:
    chain: "PlanarChain"
    q: np.ndarray
    qdot: np.ndarray
    # (9, 2) rows as in ROWS
    positions: np.ndarray
    velocities: np.ndarray
    # (9, 2, 7)
    jacobians: np.ndarray
    bias_accelerations: np.ndarray
    # (5,) absolute link angular rates
    link_rates: np.ndarray
    mass_matrix: np.ndarray
    bias_forces: np.ndarray

    def row(self, name: str) -> int:
        try:
            return ROWS[name]
        except KeyError:
            raise UnknownPointError(f"Unknown point: {name}") from None

    def angular_momentum_about(self, point: np.ndarray) -> float:
        """Same sign convention as planar_dynamics_service.angular_momentum_about."""
        r = self.positions[:5] - point
        v = self.velocities[:5]
        orbital = self.chain.mass @ (r[:, 1] * v[:, 0] - r[:, 0] * v[:, 1])
        return float(orbital - self.chain.inertia @ self.link_rates)

    def kinetic_energy(self) -> float:
        return float(0.5 * self.qdot @ self.mass_matrix @ self.qdot)


class PlanarChain:
    """Constant geometry of one RobotModel; `evaluate` is the per-state kernel."""

    def __init__(self, model: RobotModel):
        links = model.links
        self.mass = np.array([l.mass for l in links])
        self.inertia = np.array([l.inertia_zz for l in links])
        self.total_mass = float(self.mass.sum())
        self.gravity = float(model.gravity)
        length = np.array([l.length for l in links])
        offset = np.array([l.com_offset for l in links])

        W = np.zeros((N_ROWS, 5))
        W[TRUNK, TRUNK] = offset[TRUNK]
        W[LEFT_THIGH, LEFT_THIGH] = offset[LEFT_THIGH]
        W[LEFT_SHANK, [LEFT_THIGH, LEFT_SHANK]] = length[LEFT_THIGH], offset[LEFT_SHANK]
        W[RIGHT_THIGH, RIGHT_THIGH] = offset[RIGHT_THIGH]
        W[RIGHT_SHANK, [RIGHT_THIGH, RIGHT_SHANK]] = length[RIGHT_THIGH], offset[RIGHT_SHANK]
        W[LEFT_FOOT_ROW, [LEFT_THIGH, LEFT_SHANK]] = length[LEFT_THIGH], length[LEFT_SHANK]
        W[RIGHT_FOOT_ROW, [RIGHT_THIGH, RIGHT_SHANK]] = length[RIGHT_THIGH], length[RIGHT_SHANK]
        W[COM_ROW] = self.mass @ W[:5] / self.total_mass
        self.weights = W

        self.angle_map = link_angular_rows()
        self.rotational_inertia = self.angle_map.T @ (self.inertia[:, None] * self.angle_map)
        base = np.zeros((N_ROWS, 2, NQ))
        base[:, 0, 0] = 1.0
        base[:, 1, 1] = 1.0
        self._base = base
        self._sqrt_mass = np.sqrt(self.mass)[:, None, None]
        self._mass_col = self.mass[:, None]

    def _directions(self, q: np.ndarray):
        phi = self.angle_map @ q
        s = _DIRECTION_SIGN * np.sin(phi)
        c = _DIRECTION_SIGN * np.cos(phi)
        # link direction d and its rotation z x d
        return np.column_stack((s, -c)), np.column_stack((c, s))

    def positions(self, q: np.ndarray) -> np.ndarray:
        D, _ = self._directions(q)
        return q[:2] + self.weights @ D

    def jacobians(self, q: np.ndarray) -> np.ndarray:
        _, E = self._directions(q)
        return self._base + (self.weights[:, None, :] * E.T[None, :, :]) @ self.angle_map

    def evaluate(self, q: np.ndarray, qdot: np.ndarray) -> ChainTerms:
        W = self.weights
        D, E = self._directions(q)
        omega = self.angle_map @ qdot

        positions = q[:2] + W @ D
        velocities = qdot[:2] + W @ (omega[:, None] * E)
        bias_acc = -(W @ ((omega * omega)[:, None] * D))
        J = self._base + (W[:, None, :] * E.T[None, :, :]) @ self.angle_map

        Jc = J[:5]
        Jw = (self._sqrt_mass * Jc).reshape(10, NQ)
        M = Jw.T @ Jw + self.rotational_inertia
        c = (self._mass_col * bias_acc[:5]).reshape(10) @ Jc.reshape(10, NQ)
        c = c + (self.gravity * self.total_mass) * J[COM_ROW, 1]

        return ChainTerms(
            chain=self,
            q=q,
            qdot=qdot,
            positions=positions,
            velocities=velocities,
            jacobians=J,
            bias_accelerations=bias_acc,
            link_rates=omega,
            mass_matrix=M,
            bias_forces=c,
        )


@lru_cache(maxsize=32)
def planar_chain(model: RobotModel) -> PlanarChain:
    return PlanarChain(model)


def integrate_passive(model: RobotModel, q, qdot, duration: float, dt: float = 1e-4) -> Tuple[np.ndarray, np.ndarray]:
    """Unactuated flight (no contact, no torque) with fixed-step RK4."""
    chain = planar_chain(model)
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)

    def accel(qq: np.ndarray, vv: np.ndarray) -> np.ndarray:
        terms = chain.evaluate(qq, vv)
        return np.linalg.solve(terms.mass_matrix, -terms.bias_forces)

    for _ in range(int(round(duration / dt))):
        a1 = accel(q, qdot)
        v2 = qdot + 0.5 * dt * a1
        a2 = accel(q + 0.5 * dt * qdot, v2)
        v3 = qdot + 0.5 * dt * a2
        a3 = accel(q + 0.5 * dt * v2, v3)
        v4 = qdot + dt * a3
        a4 = accel(q + dt * v3, v4)
        q = q + dt / 6.0 * (qdot + 2.0 * v2 + 2.0 * v3 + v4)
        qdot = qdot + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return q, qdot
