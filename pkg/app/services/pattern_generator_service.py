"""Desired output trajectories h_d(s) and the online footstep update.

Four Bezier curves in the phase s = (t - T_k) / T:
    phi1  CoM height above the stance foot       (constant H)
    phi2  trunk pitch                            (constant)
    phi3  swing-foot x relative to stance foot   (re-planned every planner tick)
    phi4  swing-foot z relative to stance foot   (fixed arc, zero at both ends)

At the first tick of a step phi3 starts at the current swing-foot position. At each
tick with s <= 1 the current full state is mapped to the pendulum state (angular
momentum rescaled to the pendulum mass), flowed to the next landing on the fixed
schedule t_0 + (k + 1) T, the footstep law gives u_t, and phi3 becomes the
straight line from its first coefficient to u_t. Past s = 1 nothing changes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.schemas.gait import AlipState, FootstepPolicy, GaitConfig
from app.schemas.optimizer import GaitSolution
from app.schemas.robot import RobotModel, StanceLeg
from app.schemas.scenario import PatternConfig
from app.services.alip.alip_service import DIVERGENCE_NORM, footstep_command, predict_preimpact
from app.services.dynamics.planar_dynamics_service import (
    FullState,
    angular_momentum_about,
    foot_name,
    forward_kinematics,
    point_position,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BezierCurve:
    coefficients: Tuple[float, ...]

    def __post_init__(self):
        if len(self.coefficients) < 2:
            raise ValueError("a Bezier curve needs order >= 1")

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @classmethod
    def constant(cls, value: float, order: int) -> "BezierCurve":
        return cls(tuple([float(value)] * (order + 1)))


class BezierPoint(NamedTuple):
    value: float
    d1: float
    d2: float
    clamped: bool


@lru_cache(maxsize=None)
def _binomials(order: int) -> Tuple[np.ndarray, np.ndarray]:
    m = np.arange(order + 1)
    return np.array([math.comb(order, k) for k in m], dtype=float), m


def _bernstein(order: int, s: float) -> np.ndarray:
    binom, m = _binomials(order)
    return binom * s**m * (1.0 - s) ** (order - m)


def bezier_eval(curve: BezierCurve, s: float) -> BezierPoint:
    """Value and first two s-derivatives; s outside [0, 1] is clamped."""
    clamped = s < 0.0 or s > 1.0
    s = min(max(s, 0.0), 1.0)
    a = np.asarray(curve.coefficients, dtype=float)
    n = curve.order
    value = float(_bernstein(n, s) @ a)
    d1 = float(n * (_bernstein(n - 1, s) @ np.diff(a)))
    d2 = float(n * (n - 1) * (_bernstein(n - 2, s) @ np.diff(a, 2))) if n >= 2 else 0.0
    return BezierPoint(value, d1, d2, clamped)


@dataclass(frozen=True)
class PhaseClock:
    step_start: float
    period: float
    # landing time on the fixed step schedule; step_start + period when unset
    planned_landing: Optional[float] = None

    def phase(self, t: float) -> float:
        return (t - self.step_start) / self.period

    @property
    def landing_time(self) -> float:
        if self.planned_landing is None:
            return self.step_start + self.period
        return self.planned_landing


@dataclass(frozen=True)
class DesiredOutputs:
    phi1: BezierCurve
    phi2: BezierCurve
    phi3: BezierCurve
    phi4: BezierCurve

    @property
    def curves(self) -> Tuple[BezierCurve, BezierCurve, BezierCurve, BezierCurve]:
        return (self.phi1, self.phi2, self.phi3, self.phi4)

    @cached_property
    def _order_groups(self):
        groups = {}
        for i, curve in enumerate(self.curves):
            groups.setdefault(curve.order, []).append(i)
        out = []
        for n, idx in groups.items():
            a = np.array([self.curves[i].coefficients for i in idx], dtype=float)
            out.append((n, idx, a, n * np.diff(a, axis=1), n * (n - 1) * np.diff(a, 2, axis=1)))
        return tuple(out)

    def evaluate(self, s: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Values, first and second s-derivatives of all four curves at clamped s."""
        s = min(max(s, 0.0), 1.0)
        value, d1, d2 = np.zeros(4), np.zeros(4), np.zeros(4)
        for n, idx, a, a1, a2 in self._order_groups:
            value[idx] = a @ _bernstein(n, s)
            d1[idx] = a1 @ _bernstein(n - 1, s)
            if n >= 2:
                d2[idx] = a2 @ _bernstein(n - 2, s)
        return value, d1, d2


@dataclass(frozen=True)
class PatternSnapshot:
    outputs: DesiredOutputs
    clock: PhaseClock


class DesiredTrajectory(NamedTuple):
    h: np.ndarray
    hdot: np.ndarray
    hddot: np.ndarray
    s: float
    clamped: bool


def desired(snapshot: PatternSnapshot, t: float) -> DesiredTrajectory:
    """h_d, dh_d/dt and d2h_d/dt2 with coefficients frozen. A clamped phase holds the terminal pose at rest."""
    T = snapshot.clock.period
    s = snapshot.clock.phase(t)
    h, d1, d2 = snapshot.outputs.evaluate(s)
    if s > 1.0:
        return DesiredTrajectory(h, np.zeros(4), np.zeros(4), s, True)
    hdot = d1 / T
    hddot = d2 / T**2
    return DesiredTrajectory(h, hdot, hddot, s, s < 0.0)


def interpolate_phi3(alpha0: float, u_t: float, order: int) -> Tuple[float, ...]:
    return tuple(float(alpha0 + (m / order) * (u_t - alpha0)) for m in range(order + 1))


def swing_foot_offset(model: RobotModel, q, stance: StanceLeg) -> np.ndarray:
    """Swing-foot position relative to the stance foot."""
    kin = forward_kinematics(model, q)
    return kin.point(foot_name(stance.other)) - kin.point(foot_name(stance))


def full_to_alip(model: RobotModel, state: FullState) -> AlipState:
    """x_SC = x_CoM - x_stance, L_S = angular momentum about the stance foot."""
    kin = forward_kinematics(model, state.q)
    foot = kin.point(foot_name(state.stance))
    com = point_position(model, state.q, "com", kin=kin)
    l_s = angular_momentum_about(model, state.q, state.qdot, foot, kin=kin)
    return AlipState(x_sc=float(com[0] - foot[0]), l_s=l_s)


def template_state(model: RobotModel, state: FullState, cfg: GaitConfig) -> AlipState:
    """Pendulum state in planner units: L_S scaled by cfg.m / total robot mass, so that
    L / (cfg.m H) is the CoM velocity the pendulum model sees."""
    x = full_to_alip(model, state)
    return AlipState(x_sc=x.x_sc, l_s=x.l_s * cfg.m / model.total_mass)


class UpdateStatus(str, Enum):
    UPDATED = "updated"
    LATE = "late"
    HELD = "held"


def update_phi3(
    coefficients: Sequence[float],
    clock: PhaseClock,
    t: float,
    state: FullState,
    model: RobotModel,
    policy: FootstepPolicy,
    cfg: GaitConfig,
) -> Tuple[Tuple[float, ...], UpdateStatus, float]:
    """One planner tick for phi3; returns (coefficients, status, u_t). u_t is nan when nothing was updated."""
    coefficients = tuple(float(c) for c in coefficients)
    if clock.phase(t) > 1.0:
        return coefficients, UpdateStatus.LATE, math.nan
    try:
        x_now = template_state(model, state, cfg)
        x_pre = predict_preimpact(x_now, t, max(t, clock.landing_time), cfg)
    except ValueError:
        x_pre = None
    if x_pre is None or np.linalg.norm(x_pre.as_array()) > DIVERGENCE_NORM:
        logger.warning("pendulum prediction diverged at t=%.4f; holding phi3", t)
        return coefficients, UpdateStatus.HELD, math.nan
    u_t = footstep_command(x_pre, policy)
    return interpolate_phi3(coefficients[0], u_t, len(coefficients) - 1), UpdateStatus.UPDATED, u_t


class PatternGenerator:
    """Owns the mutable phi3 coefficients of one simulation loop."""

    def __init__(self, model: RobotModel, gait: GaitSolution, pattern: PatternConfig | None = None):
        pattern = pattern or PatternConfig()
        self.model = model
        self.gait = gait
        order = pattern.phi3_order
        self.phi1 = BezierCurve.constant(gait.gait.H, order)
        self.phi2 = BezierCurve.constant(pattern.trunk_pitch, order)
        self.phi4 = BezierCurve(tuple(float(a) for a in pattern.phi4))
        self.phi3_coefficients: Tuple[float, ...] = interpolate_phi3(-gait.policy.u_star, gait.policy.u_star, order)
        self.clock = PhaseClock(step_start=0.0, period=gait.gait.T)
        self.last_u: float = gait.policy.u_star
        # time of step 0 on the fixed landing schedule
        self.schedule_origin: Optional[float] = None

    def start_step(self, t: float, state: FullState) -> UpdateStatus:
        """New step at t: restart the phase clock, anchor phi3 at the swing foot, then plan."""
        T = self.gait.gait.T
        if self.schedule_origin is None:
            self.schedule_origin = t - state.step_index * T
        self.clock = PhaseClock(step_start=t, period=T, planned_landing=self.schedule_origin + (state.step_index + 1) * T)
        alpha0 = float(swing_foot_offset(self.model, state.q, state.stance)[0])
        self.phi3_coefficients = (alpha0,) + self.phi3_coefficients[1:]
        return self.tick(t, state)

    def tick(self, t: float, state: FullState) -> UpdateStatus:
        coefficients, status, u_t = update_phi3(
            self.phi3_coefficients, self.clock, t, state, self.model, self.gait.policy, self.gait.gait
        )
        self.phi3_coefficients = coefficients
        if status is UpdateStatus.UPDATED:
            self.last_u = u_t
        return status

    def snapshot(self) -> PatternSnapshot:
        outputs = DesiredOutputs(
            phi1=self.phi1, phi2=self.phi2, phi3=BezierCurve(self.phi3_coefficients), phi4=self.phi4
        )
        return PatternSnapshot(outputs=outputs, clock=self.clock)
