"""Planar floating-base rigid-body dynamics for the 5-link point-foot biped.

Generalized coordinates q = [p_x, p_z, theta, q1, q2, q3, q4]: hip position, trunk
pitch (counter-clockwise, zero = upright), left hip/knee, right hip/knee. Joint
angles are relative to the parent link. Every link rotates with the trunk pitch,
so absolute link angles are

    trunk        theta
    left thigh   theta + q1          right thigh   theta + q3
    left shank   theta + q1 + q2     right shank   theta + q3 + q4

The trunk points up from the hip, the legs point down from it.

Dynamics use 3-component planar spatial vectors expressed in world coordinates at
the origin, motion [omega, v_x, v_z], force [n, f_x, f_z]. The mass matrix comes
from the composite-rigid-body algorithm and the bias vector from recursive
Newton-Euler with qdd = 0. The two base translations are massless virtual joints.

Angular momenta are reported positive when the mass moves forward (+x) above the
reference point, the sign the reduced-order pendulum uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from app.schemas.robot import RobotModel, StanceLeg

NQ = 7
N_ACTUATED = 4

TRUNK, LEFT_THIGH, LEFT_SHANK, RIGHT_THIGH, RIGHT_SHANK = range(5)

# dof k >= 2 moves link k - 2; dofs 0, 1 are the massless base translations
_DOF_PARENT = (-1, 0, 1, 2, 3, 2, 5)
_LINK_ANCESTORS: Tuple[Tuple[int, ...], ...] = ((2,), (2, 3), (2, 3, 4), (2, 5), (2, 5, 6))

POINTS = ("left_foot", "right_foot", "com", "trunk", "hip")

# torque of actuator j acts on dof j + 3
ACTUATION = np.vstack((np.zeros((3, N_ACTUATED)), np.eye(N_ACTUATED)))

class UnknownPointError(ValueError):
    pass

@dataclass(frozen=True)
class Kinematics:
    """Positions of one configuration; arrays are (2,) world points unless noted."""

    q: np.ndarray
    # absolute link angles, LINK order
    phi: np.ndarray
    hip: np.ndarray
    left_knee: np.ndarray
    right_knee: np.ndarray
    left_foot: np.ndarray
    right_foot: np.ndarray
    # (5, 2) link CoM positions
    link_com: np.ndarray
    # whole-body CoM
    com: np.ndarray
    # (7, 2) rotation centre of each revolute dof (rows 0, 1 unused)
    joint_origin: np.ndarray

    def point(self, name: str) -> np.ndarray:
        if name == "left_foot":
            return self.left_foot
        if name == "right_foot":
            return self.right_foot
        if name == "com":
            return self.com
        if name == "trunk":
            return self.link_com[TRUNK]
        if name == "hip":
            return self.hip
        raise UnknownPointError(f"Unknown point: {name}")

def foot_name(leg: StanceLeg) -> str:
    return "left_foot" if leg is StanceLeg.LEFT else "right_foot"

def _link_params(model: RobotModel) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    links = model.links
    return (
        np.array([l.mass for l in links]),
        np.array([l.length for l in links]),
        np.array([l.com_offset for l in links]),
        np.array([l.inertia_zz for l in links]),
    )

def _cross_z(d: np.ndarray) -> np.ndarray:
    # z_hat x (d_x, d_z)
    return np.array([-d[1], d[0]])

def _check_state(q, qdot=None) -> Tuple[np.ndarray, np.ndarray]:
    q = np.asarray(q, dtype=float)
    if q.shape != (NQ,):
        raise ValueError(f"q must have shape ({NQ},), got {q.shape}")
    if qdot is None:
        return q, np.zeros(NQ)
    qdot = np.asarray(qdot, dtype=float)
    if qdot.shape != (NQ,):
        raise ValueError(f"qdot must have shape ({NQ},), got {qdot.shape}")
    return q, qdot

def forward_kinematics(model: RobotModel, q: Sequence[float]) -> Kinematics:
    q, _ = _check_state(q)
    mass, length, com_offset, _ = _link_params(model)
    theta = q[2]
    phi = np.array([theta, theta + q[3], theta + q[3] + q[4], theta + q[5], theta + q[5] + q[6]])
    s, c = np.sin(phi), np.cos(phi)
    direction = np.column_stack((s, -c))
    direction[TRUNK] = (-s[TRUNK], c[TRUNK])

    hip = q[:2].copy()
    left_knee = hip + length[LEFT_THIGH] * direction[LEFT_THIGH]
    left_foot = left_knee + length[LEFT_SHANK] * direction[LEFT_SHANK]
    right_knee = hip + length[RIGHT_THIGH] * direction[RIGHT_THIGH]
    right_foot = right_knee + length[RIGHT_SHANK] * direction[RIGHT_SHANK]

    proximal = np.array([hip, hip, left_knee, hip, right_knee])
    link_com = proximal + com_offset[:, None] * direction

    joint_origin = np.zeros((NQ, 2))
    joint_origin[2] = hip
    joint_origin[3] = hip
    joint_origin[4] = left_knee
    joint_origin[5] = hip
    joint_origin[6] = right_knee
    return Kinematics(
        q=q,
        phi=phi,
        hip=hip,
        left_knee=left_knee,
        right_knee=right_knee,
        left_foot=left_foot,
        right_foot=right_foot,
        link_com=link_com,
        com=mass @ link_com / mass.sum(),
        joint_origin=joint_origin,
    )

# ---------------------------------------------------------------------------
# Jacobians
# ---------------------------------------------------------------------------

def _chain_jacobian(kin: Kinematics, p: np.ndarray, ancestors: Tuple[int, ...]) -> np.ndarray:
    J = np.zeros((2, NQ))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    for k in ancestors:
        J[:, k] = _cross_z(p - kin.joint_origin[k])
    return J

def _point_chain(kin: Kinematics, name: str) -> Tuple[np.ndarray, Tuple[int, ...]]:
    if name == "left_foot":
        return kin.left_foot, _LINK_ANCESTORS[LEFT_SHANK]
    if name == "right_foot":
        return kin.right_foot, _LINK_ANCESTORS[RIGHT_SHANK]
    if name == "trunk":
        return kin.link_com[TRUNK], _LINK_ANCESTORS[TRUNK]
    if name == "hip":
        return kin.hip, ()
    raise UnknownPointError(f"Unknown point: {name}")

def link_jacobians(kin: Kinematics) -> np.ndarray:
    """(5, 2, 7) translational Jacobians of the link CoMs."""
    return np.array([_chain_jacobian(kin, kin.link_com[i], _LINK_ANCESTORS[i]) for i in range(5)])

def link_angular_rows() -> np.ndarray:
    """(5, 7) maps qdot to absolute link angular rates."""
    rows = np.zeros((5, NQ))
    for i, anc in enumerate(_LINK_ANCESTORS):
        rows[i, list(anc)] = 1.0
    return rows

def com_jacobian(model: RobotModel, q, *, kin: Kinematics | None = None) -> np.ndarray:
    kin = kin or forward_kinematics(model, q)
    mass = _link_params(model)[0]
    return np.tensordot(mass, link_jacobians(kin), axes=1) / mass.sum()

def point_jacobian(model: RobotModel, q, point: str, *, kin: Kinematics | None = None) -> np.ndarray:
    """2x7 Jacobian of a named point ('left_foot', 'right_foot', 'com', 'trunk', 'hip')."""
    if point not in POINTS:
        raise UnknownPointError(f"Unknown point: {point}")
    kin = kin or forward_kinematics(model, q)
    if point == "com":
        return com_jacobian(model, q, kin=kin)
    p, anc = _point_chain(kin, point)
    return _chain_jacobian(kin, p, anc)

def point_position(model: RobotModel, q, point: str, *, kin: Kinematics | None = None) -> np.ndarray:
    if point not in POINTS:
        raise UnknownPointError(f"Unknown point: {point}")
    kin = kin or forward_kinematics(model, q)
    return kin.point(point)

def point_velocity(model: RobotModel, q, qdot, point: str, *, kin: Kinematics | None = None) -> np.ndarray:
    q, qdot = _check_state(q, qdot)
    return point_jacobian(model, q, point, kin=kin) @ qdot

def _joint_velocities(kin: Kinematics, qdot: np.ndarray) -> np.ndarray:
    v = np.zeros((NQ, 2))
    hip_v = qdot[:2]
    lknee_v = _chain_jacobian(kin, kin.left_knee, _LINK_ANCESTORS[LEFT_THIGH]) @ qdot
    rknee_v = _chain_jacobian(kin, kin.right_knee, _LINK_ANCESTORS[RIGHT_THIGH]) @ qdot
    v[2] = v[3] = v[5] = hip_v
    v[4] = lknee_v
    v[6] = rknee_v
    return v

def _chain_bias(kin: Kinematics, p: np.ndarray, anc: Tuple[int, ...], qdot: np.ndarray, joint_v: np.ndarray) -> np.ndarray:
    pdot = _chain_jacobian(kin, p, anc) @ qdot
    acc = np.zeros(2)
    for k in anc:
        acc += qdot[k] * _cross_z(pdot - joint_v[k])
    return acc

def point_bias_acceleration(model: RobotModel, q, qdot, point: str, *, kin: Kinematics | None = None) -> np.ndarray:
    """Jdot * qdot of a named point: its acceleration when qdd = 0."""
    if point not in POINTS:
        raise UnknownPointError(f"Unknown point: {point}")
    q, qdot = _check_state(q, qdot)
    kin = kin or forward_kinematics(model, q)
    joint_v = _joint_velocities(kin, qdot)
    if point == "com":
        mass = _link_params(model)[0]
        acc = sum(mass[i] * _chain_bias(kin, kin.link_com[i], _LINK_ANCESTORS[i], qdot, joint_v) for i in range(5))
        return acc / mass.sum()
    p, anc = _point_chain(kin, point)
    return _chain_bias(kin, p, anc, qdot, joint_v)

# ---------------------------------------------------------------------------
# Spatial-vector dynamics
# ---------------------------------------------------------------------------

def _crm(v: np.ndarray, m: np.ndarray) -> np.ndarray:
    return np.array([0.0, -v[0] * m[2] + m[0] * v[2], v[0] * m[1] - m[0] * v[1]])

def _crf(v: np.ndarray, f: np.ndarray) -> np.ndarray:
    return np.array([v[1] * f[2] - v[2] * f[1], -v[0] * f[2], v[0] * f[1]])

def _spatial_inertia(mass: float, inertia: float, c: np.ndarray) -> np.ndarray:
    cx, cz = c
    return np.array(
        [
            [inertia + mass * (cx * cx + cz * cz), -mass * cz, mass * cx],
            [-mass * cz, mass, 0.0],
            [mass * cx, 0.0, mass],
        ]
    )

def _motion_subspaces(kin: Kinematics) -> np.ndarray:
    S = np.zeros((NQ, 3))
    S[0] = (0.0, 1.0, 0.0)
    S[1] = (0.0, 0.0, 1.0)
    for k in range(2, NQ):
        r = kin.joint_origin[k]
        S[k] = (1.0, r[1], -r[0])
    return S

def _body_inertias(model: RobotModel, kin: Kinematics) -> list:
    mass, _, _, inertia = _link_params(model)
    bodies = [np.zeros((3, 3)), np.zeros((3, 3))]
    bodies += [_spatial_inertia(mass[i], inertia[i], kin.link_com[i]) for i in range(5)]
    return bodies

def mass_matrix(model: RobotModel, q, *, kin: Kinematics | None = None) -> np.ndarray:
    q, _ = _check_state(q)
    kin = kin or forward_kinematics(model, q)
    S = _motion_subspaces(kin)
    composite = _body_inertias(model, kin)
    M = np.zeros((NQ, NQ))
    for i in reversed(range(NQ)):
        F = composite[i] @ S[i]
        M[i, i] = S[i] @ F
        j = _DOF_PARENT[i]
        while j >= 0:
            M[i, j] = M[j, i] = S[j] @ F
            j = _DOF_PARENT[j]
        parent = _DOF_PARENT[i]
        if parent >= 0:
            composite[parent] = composite[parent] + composite[i]
    return M

def bias_forces(model: RobotModel, q, qdot, *, kin: Kinematics | None = None) -> np.ndarray:
    """Gravity, Coriolis and centrifugal terms c(q, qdot) of M qdd + c = B tau + J^T f."""
    q, qdot = _check_state(q, qdot)
    kin = kin or forward_kinematics(model, q)
    S = _motion_subspaces(kin)
    inertias = _body_inertias(model, kin)
    # gravity enters as an upward acceleration of the root
    a_root = np.array([0.0, 0.0, model.gravity])

    v = np.zeros((NQ, 3))
    a = np.zeros((NQ, 3))
    f = np.zeros((NQ, 3))
    for k in range(NQ):
        parent = _DOF_PARENT[k]
        v_parent = v[parent] if parent >= 0 else np.zeros(3)
        a_parent = a[parent] if parent >= 0 else a_root
        v[k] = v_parent + S[k] * qdot[k]
        a[k] = a_parent + _crm(v[k], S[k]) * qdot[k]
        if k >= 2:
            inertia = inertias[k]
            f[k] = inertia @ a[k] + _crf(v[k], inertia @ v[k])

    c = np.zeros(NQ)
    for k in reversed(range(NQ)):
        c[k] = S[k] @ f[k]
        parent = _DOF_PARENT[k]
        if parent >= 0:
            f[parent] += f[k]
    return c

# ---------------------------------------------------------------------------
# CoM, momentum, energy
# ---------------------------------------------------------------------------

def com_state(model: RobotModel, q, qdot, *, kin: Kinematics | None = None) -> Tuple[np.ndarray, np.ndarray]:
    q, qdot = _check_state(q, qdot)
    kin = kin or forward_kinematics(model, q)
    return point_position(model, q, "com", kin=kin), com_jacobian(model, q, kin=kin) @ qdot

def _sagittal_cross(r: np.ndarray, v: np.ndarray) -> np.ndarray:
    # moment of v at lever arm r, positive for forward motion above the point
    return r[..., 1] * v[..., 0] - r[..., 0] * v[..., 1]

def angular_momentum_about(model: RobotModel, q, qdot, point: Sequence[float], *, kin: Kinematics | None = None) -> float:
    """Total angular momentum about a fixed world point coinciding with `point`."""
    q, qdot = _check_state(q, qdot)
    kin = kin or forward_kinematics(model, q)
    mass, _, _, inertia = _link_params(model)
    v_links = np.einsum("ijk,k->ij", link_jacobians(kin), qdot)
    omega = link_angular_rows() @ qdot
    r = kin.link_com - np.asarray(point, dtype=float)
    # link spin is counter-clockwise positive, hence the minus sign
    return float(np.sum(mass * _sagittal_cross(r, v_links)) - np.sum(inertia * omega))

def angular_momentum_row(model: RobotModel, q, point: Sequence[float], *, kin: Kinematics | None = None) -> np.ndarray:
    """7-vector l with angular_momentum_about(model, q, qdot, point) == l @ qdot."""
    kin = kin or forward_kinematics(model, q)
    mass, _, _, inertia = _link_params(model)
    J = link_jacobians(kin)
    r = kin.link_com - np.asarray(point, dtype=float)
    rows = mass[:, None] * (r[:, 1:2] * J[:, 0, :] - r[:, 0:1] * J[:, 1, :])
    return rows.sum(axis=0) - inertia @ link_angular_rows()

def angular_momentum_about_com(model: RobotModel, q, qdot, *, kin: Kinematics | None = None) -> float:
    kin = kin or forward_kinematics(model, q)
    return angular_momentum_about(model, q, qdot, point_position(model, q, "com", kin=kin), kin=kin)

def angular_momentum_transfer(l_a: float, point_a, point_b, mass: float, v_com) -> float:
    """Angular momentum about B from the one about A: L_B = L_A + (A - B) x m v_CoM."""
    d = np.asarray(point_a, dtype=float) - np.asarray(point_b, dtype=float)
    return float(l_a + mass * _sagittal_cross(d, np.asarray(v_com, dtype=float)))

def angular_momentum_rate_about_contact(
    mass: float, gravity: float, x_sc: float, surface_velocity: float, zdot_com: float
) -> float:
    """Rate of angular momentum about a contact point sliding with the surface."""
    return mass * gravity * x_sc + mass * surface_velocity * zdot_com

def kinetic_energy(model: RobotModel, q, qdot, *, kin: Kinematics | None = None) -> float:
    q, qdot = _check_state(q, qdot)
    kin = kin or forward_kinematics(model, q)
    mass, _, _, inertia = _link_params(model)
    v_links = np.einsum("ijk,k->ij", link_jacobians(kin), qdot)
    omega = link_angular_rows() @ qdot
    return float(0.5 * np.sum(mass * np.sum(v_links**2, axis=1)) + 0.5 * np.sum(inertia * omega**2))

def potential_energy(model: RobotModel, q, *, kin: Kinematics | None = None) -> float:
    kin = kin or forward_kinematics(model, q)
    mass = _link_params(model)[0]
    return float(model.gravity * np.sum(mass * kin.link_com[:, 1]))

def total_energy(model: RobotModel, q, qdot) -> float:
    kin = forward_kinematics(model, q)
    return kinetic_energy(model, q, qdot, kin=kin) + potential_energy(model, q, kin=kin)

def mirror_legs(q) -> np.ndarray:
    """Swap the left and right leg coordinates (also valid for velocities)."""
    q = np.asarray(q, dtype=float).copy()
    q[[3, 4, 5, 6]] = q[[5, 6, 3, 4]]
    return q

@dataclass(frozen=True)
class FullState:
    """Full-order hybrid state. contact_anchor = stance-foot x minus x_S(t), fixed over a stance phase."""

    q: np.ndarray
    qdot: np.ndarray
    stance: StanceLeg
    t: float
    step_index: int = 0
    contact_anchor: float = 0.0

    @property
    def swing(self) -> StanceLeg:
        return self.stance.other

    def with_motion(self, q: np.ndarray, qdot: np.ndarray, t: float) -> "FullState":
        return FullState(q=q, qdot=qdot, stance=self.stance, t=t, step_index=self.step_index, contact_anchor=self.contact_anchor)
