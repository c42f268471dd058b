"""Full-order hybrid walking simulation.

One stance phase is integrated with fixed-step RK4 on the closed loop
(constrained dynamics + linearizing torque, pattern coefficients frozen between
planner ticks). Touchdown of the swing foot is located by bisection; a plastic
impact at the new contact brings that foot to the surface velocity and the legs
swap roles. Double support is instantaneous.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import root

from app.core.errors import NumericalError
from app.schemas.gait import SurfaceMotion
from app.schemas.optimizer import GaitSolution
from app.schemas.robot import RobotModel, StanceLeg
from app.schemas.scenario import PatternConfig, Scenario, ScenarioConfig
from app.services.dynamics.chain_terms_service import COM_ROW, foot_row, planar_chain
from app.services.dynamics.planar_dynamics_service import (
    LEFT_SHANK,
    LEFT_THIGH,
    RIGHT_SHANK,
    RIGHT_THIGH,
    NQ,
    FullState,
    angular_momentum_about,
    angular_momentum_row,
    angular_momentum_transfer,
    com_jacobian,
    com_state,
    foot_name,
    forward_kinematics,
    kinetic_energy,
    mass_matrix,
    point_jacobian,
    point_position,
    total_energy,
)
from app.services.io_controller_service import ControlResult, io_linearizing_control
from app.services.pattern_generator_service import (
    BezierCurve,
    PatternGenerator,
    PatternSnapshot,
    UpdateStatus,
    bezier_eval,
    desired,
    full_to_alip,
    interpolate_phi3,
)

logger = logging.getLogger(__name__)

SWITCH_TOLERANCE = 1e-9
DRIFT_TOLERANCE = 1e-8
STATE_COLUMNS = ("px", "pz", "theta", "q1", "q2", "q3", "q4")


class InverseKinematicsError(NumericalError):
    def __init__(self, message: str, residual: float, nearest_q: np.ndarray):
        super().__init__(message)
        self.residual = residual
        self.nearest_q = nearest_q


# ---------------------------------------------------------------------------
# initial state
# ---------------------------------------------------------------------------

def _two_link_ik(dx: float, dz: float, thigh: float, shank: float) -> Tuple[float, float]:
    """Absolute thigh/shank angles reaching (dx, dz) from the hip, knee ahead of the hip-foot line."""
    d = math.hypot(dx, dz)
    d = min(max(d, abs(thigh - shank) + 1e-6), thigh + shank - 1e-6)
    line = math.atan2(dx, -dz)
    a = math.acos((thigh**2 + d**2 - shank**2) / (2.0 * thigh * d))
    b = math.acos((shank**2 + d**2 - thigh**2) / (2.0 * shank * d))
    return line + a, line - b


def _initial_guess(
    robot: RobotModel, stance: StanceLeg, stance_x: float, x_sc: float, H: float, theta0: float, swing_dx: float
) -> np.ndarray:
    # hip placed so that a straight-legged robot would have its CoM at the target
    com_above_hip = point_position(robot, np.zeros(NQ), "com")[1]
    hip = np.array([stance_x + x_sc, H - com_above_hip])
    q = np.zeros(NQ)
    q[:2], q[2] = hip, theta0
    feet = {stance: stance_x, stance.other: stance_x + swing_dx}
    for leg, (thigh, shank, j) in ((StanceLeg.LEFT, (LEFT_THIGH, LEFT_SHANK, 3)), (StanceLeg.RIGHT, (RIGHT_THIGH, RIGHT_SHANK, 5))):
        phi_t, phi_s = _two_link_ik(
            feet[leg] - hip[0], -hip[1], robot.links[thigh].length, robot.links[shank].length
        )
        q[j] = phi_t - theta0
        q[j + 1] = phi_s - phi_t
    return q


def initialize_full_state(
    robot: RobotModel,
    gait: GaitSolution,
    surface: SurfaceMotion,
    *,
    pattern: Optional[PatternConfig] = None,
    stance: StanceLeg = StanceLeg.LEFT,
    t0: float = 0.0,
) -> FullState:
    """Full-order state matching the post-impact pendulum state of the gait's periodic orbit."""
    pattern = pattern or PatternConfig()
    cfg = gait.gait
    x0 = gait.periodic_orbit.x_post
    u = gait.periodic_orbit.u
    theta0 = pattern.trunk_pitch
    st, sw = foot_name(stance), foot_name(stance.other)
    stance_x = float(surface.position(t0))

    def residual(q: np.ndarray) -> np.ndarray:
        kin = forward_kinematics(robot, q)
        p_st, p_sw = kin.point(st), kin.point(sw)
        com = point_position(robot, q, "com", kin=kin)
        return np.array(
            [
                p_st[0] - stance_x,
                p_st[1],
                com[1] - p_st[1] - cfg.H,
                com[0] - p_st[0] - x0.x_sc,
                q[2] - theta0,
                p_sw[0] - p_st[0] + u,
                p_sw[1] - p_st[1],
            ]
        )

    guess = _initial_guess(robot, stance, stance_x, x0.x_sc, cfg.H, theta0, -u)
    sol = root(residual, guess, method="hybr", options={"xtol": 1e-13})
    q = sol.x
    err = float(np.abs(residual(q)).max())
    if not np.all(np.isfinite(q)) or err > 1e-9:
        raise InverseKinematicsError(
            f"Initial pose outside the workspace (residual {err:.3g}); nearest q={np.round(q, 4).tolist()}", err, q
        )

    # velocity: stance foot moves with the surface, no vertical CoM motion, upright trunk at rest,
    # angular momentum about the stance foot equals the orbit's, swing foot follows the desired curves
    kin = forward_kinematics(robot, q)
    J_st = point_jacobian(robot, q, st, kin=kin)
    J_sw = point_jacobian(robot, q, sw, kin=kin)
    J_com = com_jacobian(robot, q, kin=kin)
    phi3_slope = bezier_eval(BezierCurve(interpolate_phi3(-u, u, pattern.phi3_order)), 0.0).d1
    phi4_slope = bezier_eval(BezierCurve(tuple(pattern.phi4)), 0.0).d1
    A = np.vstack(
        [
            J_st,
            J_com[1],
            angular_momentum_row(robot, q, kin.point(st), kin=kin),
            np.eye(NQ)[2],
            J_sw - J_st,
        ]
    )
    b = np.array([float(surface.velocity(t0)), 0.0, 0.0, x0.l_s, 0.0, phi3_slope / cfg.T, phi4_slope / cfg.T])
    if np.linalg.cond(A) > 1e10:
        raise InverseKinematicsError("Initial velocity map is singular", float("inf"), q)
    qdot = np.linalg.solve(A, b)
    return FullState(q=q, qdot=qdot, stance=stance, t=t0, step_index=0, contact_anchor=0.0)

# ---------------------------------------------------------------------------
# switching surface and impact
# ---------------------------------------------------------------------------

def detect_switch(
    z_fn: Callable[[float], float],
    t0: float,
    t1: float,
    *,
    z0: Optional[float] = None,
    z1: Optional[float] = None,
    tol: float = SWITCH_TOLERANCE,
) -> Optional[float]:
    """Time in (t0, t1] where z crosses zero going down, located by bisection to tol.

    A zero at t0 (a foot leaving the ground) is not an event.
    """
    z0 = z_fn(t0) if z0 is None else z0
    if z0 <= 0.0:
        return None
    z1 = z_fn(t1) if z1 is None else z1
    if z1 > 0.0:
        return None
    lo, hi = t0, t1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if z_fn(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def _surface_frame_kinetic_energy(model: RobotModel, q: np.ndarray, qdot: np.ndarray, surface_velocity: float) -> float:
    rel = qdot.copy()
    rel[0] -= surface_velocity
    return kinetic_energy(model, q, rel)


@dataclass(frozen=True)
class ImpactResult:
    state: FullState
    impulse: np.ndarray
    # angular momentum about the new contact point before / after the impulse
    l_new_pre: float
    l_new_post: float
    l_old_pre: float
    transfer_residual: float
    kinetic_jump: float
    surface_frame_loss: float
    degenerate: bool


def impact_reset(model: RobotModel, state_pre: FullState, surface: SurfaceMotion, t: float) -> ImpactResult:
    """Plastic touchdown of the swing foot on the moving surface; the legs swap roles."""
    q, qdot = state_pre.q, state_pre.qdot
    new_stance = state_pre.stance.other
    kin = forward_kinematics(model, q)
    new_foot = kin.point(foot_name(new_stance))
    old_foot = kin.point(foot_name(state_pre.stance))
    v_s = float(surface.velocity(t))

    M = mass_matrix(model, q, kin=kin)
    J = point_jacobian(model, q, foot_name(new_stance), kin=kin)
    M_inv_JT = np.linalg.solve(M, J.T)
    Lam = np.linalg.inv(J @ M_inv_JT)
    impulse = Lam @ (np.array([v_s, 0.0]) - J @ qdot)
    qdot_post = qdot + M_inv_JT @ impulse

    degenerate = bool(impulse[1] < 0.0)
    if degenerate:
        logger.warning("t=%.5f: touchdown impulse pulls on the surface (F_z=%.4g)", t, impulse[1])

    l_old_pre = angular_momentum_about(model, q, qdot, old_foot, kin=kin)
    l_new_pre = angular_momentum_about(model, q, qdot, new_foot, kin=kin)
    l_new_post = angular_momentum_about(model, q, qdot_post, new_foot, kin=kin)
    _, v_com = com_state(model, q, qdot, kin=kin)
    transferred = angular_momentum_transfer(l_old_pre, old_foot, new_foot, model.total_mass, v_com)

    post = FullState(
        q=q.copy(),
        qdot=qdot_post,
        stance=new_stance,
        t=t,
        step_index=state_pre.step_index + 1,
        contact_anchor=float(new_foot[0] - surface.position(t)),
    )
    return ImpactResult(
        state=post,
        impulse=impulse,
        l_new_pre=l_new_pre,
        l_new_post=l_new_post,
        l_old_pre=l_old_pre,
        transfer_residual=abs(transferred - l_new_pre),
        kinetic_jump=kinetic_energy(model, q, qdot_post, kin=kin) - kinetic_energy(model, q, qdot, kin=kin),
        surface_frame_loss=_surface_frame_kinetic_energy(model, q, qdot_post, v_s)
        - _surface_frame_kinetic_energy(model, q, qdot, v_s),
        degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# closed-loop integration
# ---------------------------------------------------------------------------

class _ClosedLoop:
    """Right-hand side of one stance phase; the pattern snapshot is swapped at planner ticks."""

    def __init__(self, model: RobotModel, scn: Scenario, snapshot: PatternSnapshot, stance: StanceLeg):
        self.model = model
        self.chain = planar_chain(model)
        self.gains = scn.config.gains
        self.surface = scn.surface
        self.snapshot = snapshot
        self.stance = stance

    def control(self, t: float, q: np.ndarray, qdot: np.ndarray, check: bool = True) -> ControlResult:
        traj = desired(self.snapshot, t)
        return io_linearizing_control(self.model, q, qdot, t, traj, self.gains, self.stance, self.surface, check=check)

    def rates(self, t: float, q: np.ndarray, qdot: np.ndarray, check: bool = False):
        ctrl = self.control(t, q, qdot, check)
        actuator_power = float(ctrl.tau @ qdot[3:])
        contact_power = float(ctrl.contact_force[0] * self.surface.velocity(t))
        return ctrl, ctrl.qddot, actuator_power, contact_power


@dataclass(frozen=True)
class _Step:
    q: np.ndarray
    qdot: np.ndarray
    t: float
    actuator_work: float
    contact_work: float
    control: ControlResult


def _rk4(loop: _ClosedLoop, state: FullState, h: float) -> _Step:
    t, q, v = state.t, state.q, state.qdot
    # the decoupling check runs on the first stage only
    c1, a1, pa1, pc1 = loop.rates(t, q, v, check=True)
    _, a2, pa2, pc2 = loop.rates(t + 0.5 * h, q + 0.5 * h * v, v + 0.5 * h * a1)
    v2 = v + 0.5 * h * a1
    _, a3, pa3, pc3 = loop.rates(t + 0.5 * h, q + 0.5 * h * v2, v + 0.5 * h * a2)
    v3 = v + 0.5 * h * a2
    _, a4, pa4, pc4 = loop.rates(t + h, q + h * v3, v + h * a3)
    v4 = v + h * a3
    q_new = q + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return _Step(
        q=q_new,
        qdot=v_new,
        t=t + h,
        actuator_work=h / 6.0 * (pa1 + 2.0 * pa2 + 2.0 * pa3 + pa4),
        contact_work=h / 6.0 * (pc1 + 2.0 * pc2 + 2.0 * pc3 + pc4),
        control=c1,
    )


def _project_stance(model: RobotModel, state: FullState, surface: SurfaceMotion) -> Tuple[FullState, float]:
    """Pull the stance foot back onto its surface-fixed contact point; returns the state and the drift found."""
    chain = planar_chain(model)
    row = foot_row(state.stance)
    target = np.array([float(surface.position(state.t)) + state.contact_anchor, 0.0])
    q, qdot = state.q, state.qdot
    drift = float(np.linalg.norm(target - chain.positions(q)[row]))
    if drift > DRIFT_TOLERANCE:
        for _ in range(3):
            err = target - chain.positions(q)[row]
            if np.linalg.norm(err) <= DRIFT_TOLERANCE * 1e-3:
                break
            J = chain.jacobians(q)[row]
            q = q + J.T @ np.linalg.solve(J @ J.T, err)
    J = chain.jacobians(q)[row]
    v_err = np.array([float(surface.velocity(state.t)), 0.0]) - J @ qdot
    if np.linalg.norm(v_err) > DRIFT_TOLERANCE:
        M = chain.evaluate(q, qdot).mass_matrix
        M_inv_JT = np.linalg.solve(M, J.T)
        qdot = qdot + M_inv_JT @ np.linalg.solve(J @ M_inv_JT, v_err)
    if q is state.q and qdot is state.qdot:
        return state, drift
    return state.with_motion(q, qdot, state.t), drift


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------

@dataclass
class ImpactRecord:
    t: float
    step_index: int
    from_stance: str
    step_duration: float
    swing_height: float
    u_executed: float
    u_command: float
    x_sc_pre: float
    l_s_pre: float
    x_sc_plan_pre: float
    l_new_pre: float
    l_new_post: float
    l_old_pre: float
    transfer_residual: float
    impulse_x: float
    impulse_z: float
    kinetic_jump: float
    surface_frame_loss: float
    degenerate: bool

    @property
    def momentum_jump(self) -> float:
        return abs(self.l_new_post - self.l_new_pre)


@dataclass
class SimTrace:
    # planner-rate rows (plot-ready)
    samples: List[Dict[str, float]] = field(default_factory=list)
    # physics-rate stance diagnostics
    diagnostics: Dict[str, List[float]] = field(
        default_factory=lambda: {k: [] for k in ("t", "step", "x_sc", "l_s", "zdot_com", "xdot_s", "lin_residual", "constraint_residual")}
    )
    impacts: List[ImpactRecord] = field(default_factory=list)
    steps_completed: int = 0
    failure: Optional[str] = None
    # time_cap / diverged / numerical
    failure_kind: Optional[str] = None
    t_end: float = 0.0
    max_drift: float = 0.0
    max_decoupling_cond: float = 0.0
    planner_holds: int = 0
    energy_start: float = 0.0
    energy_end: float = 0.0
    actuator_work: float = 0.0
    contact_work: float = 0.0

    @property
    def completed(self) -> bool:
        return self.failure is None

    @property
    def energy_residual(self) -> float:
        impacts = sum(rec.kinetic_jump for rec in self.impacts)
        return self.energy_end - self.energy_start - self.actuator_work - self.contact_work - impacts


def _swing_height(model: RobotModel, q: np.ndarray, stance: StanceLeg) -> float:
    return float(planar_chain(model).positions(q)[foot_row(stance.other), 1])


def _diverged(state: FullState, limit: float) -> bool:
    if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.qdot))):
        return True
    return bool(np.abs(state.q).max() > limit or np.abs(state.qdot).max() > limit)


def _record_sample(trace: SimTrace, model: RobotModel, state: FullState, pg: PatternGenerator, ctrl: ControlResult, flags: Dict[str, int]) -> None:
    x = full_to_alip(model, state)
    row: Dict[str, float] = {"t": state.t, "step": state.step_index, "stance": 0 if state.stance is StanceLeg.LEFT else 1}
    row["s"] = pg.clock.phase(state.t)
    row.update({name: float(v) for name, v in zip(STATE_COLUMNS, state.q)})
    row.update({f"d{name}": float(v) for name, v in zip(STATE_COLUMNS, state.qdot)})
    row["x_sc"], row["l_s"] = x.x_sc, x.l_s
    row.update({f"y{i + 1}": float(v) for i, v in enumerate(ctrl.y)})
    row.update({f"dy{i + 1}": float(v) for i, v in enumerate(ctrl.ydot)})
    row.update({f"tau{i + 1}": float(v) for i, v in enumerate(ctrl.tau)})
    row["u_cmd"] = pg.last_u
    row.update(flags)
    trace.samples.append(row)


def _record_diagnostics(trace: SimTrace, model: RobotModel, state: FullState, surface: SurfaceMotion, ctrl: Optional[ControlResult]) -> None:
    terms = planar_chain(model).evaluate(state.q, state.qdot)
    foot = terms.positions[foot_row(state.stance)]
    d = trace.diagnostics
    d["t"].append(state.t)
    d["step"].append(state.step_index)
    d["x_sc"].append(float(terms.positions[COM_ROW, 0] - foot[0]))
    d["l_s"].append(terms.angular_momentum_about(foot))
    d["zdot_com"].append(float(terms.velocities[COM_ROW, 1]))
    d["xdot_s"].append(float(surface.velocity(state.t)))
    d["lin_residual"].append(ctrl.linearization_residual if ctrl else math.nan)
    d["constraint_residual"].append(ctrl.constraint_residual if ctrl else math.nan)


# planner ticks and physics steps sit on global grids k / rate and n * dt
_GRID_EPS = 1e-6


def _tick_index(t: float, rate: float) -> int:
    return math.floor(t * rate + _GRID_EPS)


def _first_tick(t: float, rate: float) -> int:
    """Index of the first tick at or after t."""
    return math.ceil(t * rate - _GRID_EPS)


def _grid_step(t: float, dt: float) -> float:
    """Step to the next multiple of dt: a full dt on the grid, shorter right after an impact."""
    return (math.floor(t / dt + _GRID_EPS) + 1) * dt - t


def run_scenario(scn: Scenario) -> SimTrace:
    """Closed-loop simulation for scn.duration_steps steps; failures truncate the trace and set `failure`."""
    model, gait, cfg = scn.robot, scn.gait, scn.config
    trace = SimTrace()
    if cfg.duration_steps == 0:
        return trace

    dt = cfg.physics_dt
    rate = cfg.planner_rate
    t_cap = cfg.time_cap_factor * cfg.duration_steps * gait.gait.T
    orbit_pre = gait.periodic_orbit.x_pre

    state = initialize_full_state(model, gait, scn.surface, pattern=cfg.pattern, stance=cfg.start_stance)
    pg = PatternGenerator(model, gait, cfg.pattern)
    status = pg.start_step(state.t, state)
    loop = _ClosedLoop(model, scn, pg.snapshot(), state.stance)
    trace.energy_start = total_energy(model, state.q, state.qdot)
    last_tick = _first_tick(state.t, rate) - 1
    just_landed = 1

    try:
        while trace.steps_completed < cfg.duration_steps:
            if state.t > t_cap:
                trace.failure_kind = "time_cap"
                trace.failure = f"time cap reached at t={state.t:.4f} after {trace.steps_completed} steps"
                break
            tick = _tick_index(state.t, rate)
            sample_due = tick > last_tick
            if sample_due:
                last_tick = tick
                # start_step already planned at the step start
                if state.t > pg.clock.step_start:
                    status = pg.tick(state.t, state)
                    loop.snapshot = pg.snapshot()
                if status is UpdateStatus.HELD:
                    trace.planner_holds += 1

            step = _rk4(loop, state, _grid_step(state.t, dt))
            if sample_due:
                logger.debug("t=%.4f decoupling cond %.3g", state.t, step.control.decoupling_cond)
            trace.max_decoupling_cond = max(trace.max_decoupling_cond, step.control.decoupling_cond)
            _record_diagnostics(trace, model, state, scn.surface, step.control)
            if sample_due:
                flags = {
                    "impact": just_landed,
                    "clamped": int(pg.clock.phase(state.t) > 1.0),
                    "planner_held": int(status is UpdateStatus.HELD),
                }
                _record_sample(trace, model, state, pg, step.control, flags)
                just_landed = 0

            event_t = None
            guard = cfg.min_switch_phase
            if guard is None or pg.clock.phase(step.t) > guard:
                trial: Dict[float, _Step] = {step.t: step}

                def z_at(tt: float) -> float:
                    if tt not in trial:
                        trial[tt] = _rk4(loop, state, tt - state.t)
                    return _swing_height(model, trial[tt].q, state.stance)

                event_t = detect_switch(
                    z_at,
                    state.t,
                    step.t,
                    z0=_swing_height(model, state.q, state.stance),
                    z1=_swing_height(model, step.q, state.stance),
                )
                if event_t is not None:
                    step = trial[event_t]

            trace.actuator_work += step.actuator_work
            trace.contact_work += step.contact_work
            state, drift = _project_stance(model, state.with_motion(step.q, step.qdot, step.t), scn.surface)
            trace.max_drift = max(trace.max_drift, drift)

            if event_t is not None:
                pre_alip = full_to_alip(model, state)
                old_x = point_position(model, state.q, foot_name(state.stance))[0]
                res = impact_reset(model, state, scn.surface, state.t)
                new_x = point_position(model, state.q, foot_name(state.stance.other))[0]
                trace.impacts.append(
                    ImpactRecord(
                        t=state.t,
                        step_index=state.step_index,
                        from_stance=state.stance.value,
                        step_duration=state.t - pg.clock.step_start,
                        swing_height=_swing_height(model, state.q, state.stance),
                        u_executed=float(new_x - old_x),
                        u_command=pg.last_u,
                        x_sc_pre=pre_alip.x_sc,
                        l_s_pre=pre_alip.l_s,
                        x_sc_plan_pre=orbit_pre.x_sc,
                        l_new_pre=res.l_new_pre,
                        l_new_post=res.l_new_post,
                        l_old_pre=res.l_old_pre,
                        transfer_residual=res.transfer_residual,
                        impulse_x=float(res.impulse[0]),
                        impulse_z=float(res.impulse[1]),
                        kinetic_jump=res.kinetic_jump,
                        surface_frame_loss=res.surface_frame_loss,
                        degenerate=res.degenerate,
                    )
                )
                trace.steps_completed += 1
                state = res.state
                just_landed = 1
                status = pg.start_step(state.t, state)
                loop.stance = state.stance
                loop.snapshot = pg.snapshot()

            if _diverged(state, cfg.divergence_limit):
                trace.failure_kind = "diverged"
                trace.failure = f"diverged at t={state.t:.4f} (|q| or |qdot| > {cfg.divergence_limit:g})"
                break
    except (NumericalError, np.linalg.LinAlgError) as e:
        trace.failure_kind = "numerical"
        trace.failure = f"numerical failure at t={state.t:.4f}: {e}"
        logger.warning("scenario stopped: %s", trace.failure)

    trace.t_end = state.t
    if _diverged(state, cfg.divergence_limit):
        trace.energy_end = math.nan
    else:
        trace.energy_end = total_energy(model, state.q, state.qdot)
    if trace.failure is None:
        logger.info("scenario finished: %d steps in %.3f s", trace.steps_completed, state.t)
    return trace


# ---------------------------------------------------------------------------
# summary
# ---------------------------------------------------------------------------

def stance_phase_identity_metrics(trace: SimTrace, mass: float, gravity: float) -> Dict[str, float]:
    """Finite-differenced L_S against m g x_SC + m xdot_S zdot_CoM over the interior of every stance phase."""
    d = {k: np.asarray(v, dtype=float) for k, v in trace.diagnostics.items()}
    ldot_parts, full_parts, drop_parts = [], [], []
    for step in np.unique(d["step"]):
        idx = d["step"] == step
        if idx.sum() < 5:
            continue
        t, l_s = d["t"][idx], d["l_s"][idx]
        ldot = np.gradient(l_s, t)[1:-1]
        x_sc = d["x_sc"][idx][1:-1]
        transport = mass * d["xdot_s"][idx][1:-1] * d["zdot_com"][idx][1:-1]
        ldot_parts.append(ldot)
        full_parts.append(ldot - (mass * gravity * x_sc + transport))
        drop_parts.append(ldot - mass * gravity * x_sc)
    if not ldot_parts:
        return {"samples": 0, "peak_ldot": 0.0, "rms_full_relative": 0.0, "rms_without_transport_over_peak": 0.0}
    ldot = np.concatenate(ldot_parts)
    peak = float(np.abs(ldot).max())
    return {
        "samples": int(ldot.size),
        "peak_ldot": peak,
        "rms_full_relative": _rms(np.concatenate(full_parts)) / max(_rms(ldot), 1e-12),
        "rms_without_transport_over_peak": _rms(np.concatenate(drop_parts)) / max(peak, 1e-12),
    }


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(a))))


def _finite_max(values) -> float:
    arr = np.asarray(values, dtype=float)
    arr = arr[np.isfinite(arr)]
    return float(np.abs(arr).max()) if arr.size else 0.0


def verdict(trace: SimTrace, scn: Scenario) -> bool:
    cfg = scn.config
    if trace.failure is not None or trace.steps_completed < cfg.duration_steps:
        return False
    return (
        _finite_max(trace.diagnostics["x_sc"]) <= cfg.envelope_x_sc
        and _finite_max(trace.diagnostics["l_s"]) <= cfg.envelope_l_s
    )


def summarize(trace: SimTrace, scn: Scenario) -> Dict[str, object]:
    gait = scn.gait
    impacts = trace.impacts
    return {
        "steps_requested": scn.config.duration_steps,
        "steps_completed": trace.steps_completed,
        "failure": trace.failure,
        "failure_kind": trace.failure_kind,
        "t_end": trace.t_end,
        "physics_dt": scn.config.physics_dt,
        "period": gait.gait.T,
        "u_star": gait.policy.u_star,
        "K": list(gait.policy.K),
        "eigenvalues": [list(e) for e in gait.eigenvalues],
        "spectral_radius": gait.spectral_radius,
        "step_durations": [r.step_duration for r in impacts],
        "step_lengths": [r.u_executed for r in impacts],
        "step_commands": [r.u_command for r in impacts],
        "preimpact_x_sc": [r.x_sc_pre for r in impacts],
        "preimpact_deviation_max": _finite_max([r.x_sc_pre - r.x_sc_plan_pre for r in impacts]),
        "max_abs_x_sc": _finite_max(trace.diagnostics["x_sc"]),
        "max_abs_l_s": _finite_max(trace.diagnostics["l_s"]),
        "impact_momentum_jump_max": _finite_max([r.momentum_jump for r in impacts]),
        "impact_transfer_residual_max": _finite_max([r.transfer_residual for r in impacts]),
        "impact_swing_height_max": max([r.swing_height for r in impacts], default=0.0),
        "impact_surface_frame_loss_max": max([r.surface_frame_loss for r in impacts], default=0.0),
        "degenerate_impacts": sum(1 for r in impacts if r.degenerate),
        "linearization_residual_max": _finite_max(trace.diagnostics["lin_residual"]),
        "constraint_residual_max": _finite_max(trace.diagnostics["constraint_residual"]),
        "stance_drift_max": trace.max_drift,
        "decoupling_cond_max": trace.max_decoupling_cond,
        "planner_holds": trace.planner_holds,
        "energy": {
            "start": trace.energy_start,
            "end": trace.energy_end,
            "actuator_work": trace.actuator_work,
            "contact_work": trace.contact_work,
            "impact_jumps": sum(r.kinetic_jump for r in impacts),
            "residual": trace.energy_residual,
        },
        "ldot_identity": stance_phase_identity_metrics(trace, scn.robot.total_mass, scn.robot.gravity),
        "verdict": "pass" if verdict(trace, scn) else "fail",
    }


def build_scenario(robot: RobotModel, gait: GaitSolution, config: ScenarioConfig) -> Scenario:
    """World surface defaults to the one the gait was planned for."""
    return Scenario(gait=gait, robot=robot, surface=config.surface or gait.gait.surface, config=config)


def integrate_stance(
    scn: Scenario, state: FullState, pg: PatternGenerator, duration: float
) -> List[Tuple[float, ControlResult]]:
    """Closed-loop stance integration without touchdown detection; planner ticks as in run_scenario.

    Returns (t, control) at every physics step start.
    """
    cfg = scn.config
    dt, rate = cfg.physics_dt, cfg.planner_rate
    loop = _ClosedLoop(scn.robot, scn, pg.snapshot(), state.stance)
    out: List[Tuple[float, ControlResult]] = []
    t_end = state.t + duration
    last_tick = _first_tick(state.t, rate) - 1
    while state.t < t_end - 0.5 * dt:
        tick = _tick_index(state.t, rate)
        if tick > last_tick:
            last_tick = tick
            if state.t > pg.clock.step_start:
                pg.tick(state.t, state)
                loop.snapshot = pg.snapshot()
        step = _rk4(loop, state, _grid_step(state.t, dt))
        out.append((state.t, step.control))
        state, _ = _project_stance(scn.robot, state.with_motion(step.q, step.qdot, step.t), scn.surface)
    return out
