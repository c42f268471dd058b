"""Hybrid linear time-varying pendulum model on a horizontally swaying surface.

State x = [x_SC, L_S]: CoM position relative to the contact point and angular
momentum about it. Continuous flow  xdot = A x - f(t)  with
A = [[0, 1/(mH)], [m g, 0]] and f = [xdot_S(t), 0]. A foot landing at the fixed
instant tau_k moves the contact point by u: x+ = x- - [u, 0], L unchanged.
The reset is applied at tau_k-, then the state flows over [tau_k, tau_k + T).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Union

import numpy as np
from scipy.integrate import simpson

from app.core.errors import ConfigError, NumericalError
from app.schemas.gait import AlipState, FootstepPolicy, GaitConfig
from app.schemas.optimizer import PeriodicOrbit

logger = logging.getLogger(__name__)

QUADRATURE_STEP = 1e-4
DIVERGENCE_NORM = 1e6

StateLike = Union[AlipState, np.ndarray, list, tuple]


class NoStablePeriodicSolutionError(NumericalError):
    pass


class AlipDivergedError(NumericalError):
    pass


class SurfacePeriodError(ConfigError):
    pass


def _vec(x: StateLike) -> np.ndarray:
    if isinstance(x, AlipState):
        return x.as_array()
    return np.asarray(x, dtype=float).reshape(2)


def system_matrix(cfg: GaitConfig) -> np.ndarray:
    return np.array([[0.0, 1.0 / (cfg.m * cfg.H)], [cfg.m * cfg.g, 0.0]])


def alip_vector_field(x: StateLike, t: float, cfg: GaitConfig) -> np.ndarray:
    v = _vec(x)
    return np.array([v[1] / (cfg.m * cfg.H) - cfg.surface.velocity(t), cfg.m * cfg.g * v[0]])


def apply_impact(x_pre: StateLike, u: float) -> AlipState:
    v = _vec(x_pre)
    return AlipState(x_sc=float(v[0] - u), l_s=float(v[1]))


def footstep_command(x_pre: StateLike, policy: FootstepPolicy) -> float:
    err = _vec(x_pre) - policy.x_star.as_array()
    return float(policy.u_star + policy.gain @ err)


def continuous_stm(cfg: GaitConfig, duration: float) -> np.ndarray:
    """exp(A * duration) in closed form."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    w = cfg.omega
    beta = cfg.m * cfg.H * w
    ch, sh = math.cosh(w * duration), math.sinh(w * duration)
    return np.array([[ch, sh / beta], [beta * sh, ch]])


def forced_response(cfg: GaitConfig, t0: float, t1: float) -> np.ndarray:
    """Particular solution d with x(t1) = Phi(t1 - t0) x(t0) + d.

    d = -int_{t0}^{t1} Phi(t1 - s) f(s) ds, Simpson's rule on a ~1e-4 s grid.
    """
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if t1 == t0 or cfg.surface.is_static:
        return np.zeros(2)
    n = max(2, int(math.ceil((t1 - t0) / QUADRATURE_STEP)))
    n += n % 2
    s = np.linspace(t0, t1, n + 1)
    w = cfg.omega
    beta = cfg.m * cfg.H * w
    vs = cfg.surface.velocity(s)
    lag = w * (t1 - s)
    d_x = simpson(np.cosh(lag) * vs, x=s)
    d_l = simpson(beta * np.sinh(lag) * vs, x=s)
    return -np.array([d_x, d_l])


def predict_preimpact(x_now: StateLike, t_now: float, tau_next: float, cfg: GaitConfig) -> AlipState:
    """Flow the continuous dynamics from t_now to the landing instant tau_next-."""
    if tau_next < t_now:
        raise ValueError("tau_next must be >= t_now")
    x = continuous_stm(cfg, tau_next - t_now) @ _vec(x_now) + forced_response(cfg, t_now, tau_next)
    return AlipState.from_array(x)


def reset_matrix(policy: FootstepPolicy) -> np.ndarray:
    """I + B with B = [[-K], [0, 0]]."""
    k1, k2 = policy.K
    return np.array([[1.0 - k1, -k2], [0.0, 1.0]])


def monodromy(policy: FootstepPolicy, cfg: GaitConfig) -> np.ndarray:
    return reset_matrix(policy) @ continuous_stm(cfg, cfg.T)


def monodromy_eigenvalues(policy: FootstepPolicy, cfg: GaitConfig) -> np.ndarray:
    return np.linalg.eigvals(monodromy(policy, cfg))


def spectral_radius(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def deadbeat_gain(cfg: GaitConfig) -> tuple[float, float]:
    """Gain placing both monodromy eigenvalues at zero."""
    w = cfg.omega
    beta = cfg.m * cfg.H * w
    return 1.0, math.cosh(w * cfg.T) / (beta * math.sinh(w * cfg.T))


def check_common_period(cfg: GaitConfig) -> None:
    """The step period must be a whole number of surface periods for a T-periodic gait."""
    if cfg.surface.is_static:
        return
    ratio = cfg.T / cfg.surface.period
    if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9:
        raise SurfacePeriodError(
            f"Step period T={cfg.T} is not an integer multiple of the surface period {cfg.surface.period}"
        )


def self_consistent_preimpact(u_star: float, cfg: GaitConfig, t0: float = 0.0) -> AlipState:
    """Pre-impact state x* of the orbit on which every step executes exactly u_star."""
    phi = continuous_stm(cfg, cfg.T)
    d = forced_response(cfg, t0, t0 + cfg.T)
    rhs = d - phi @ np.array([u_star, 0.0])
    return AlipState.from_array(np.linalg.solve(np.eye(2) - phi, rhs))


def periodic_solution(policy: FootstepPolicy, cfg: GaitConfig, samples_per_step: int = 100) -> PeriodicOrbit:
    """Unique T-periodic solution of the closed loop, sampled on [0, T); t = 0 is just after a landing."""
    if samples_per_step < 1:
        raise ValueError("samples_per_step must be >= 1")
    check_common_period(cfg)
    reset = reset_matrix(policy)
    phi = continuous_stm(cfg, cfg.T)
    rho = spectral_radius(reset @ phi)
    if rho >= 1.0:
        raise NoStablePeriodicSolutionError(f"no stable periodic solution (spectral radius {rho:.6g})")

    d = forced_response(cfg, 0.0, cfg.T)
    k = policy.gain
    g = np.array([k @ policy.x_star.as_array() - policy.u_star, 0.0])
    x0 = np.linalg.solve(np.eye(2) - reset @ phi, reset @ d + g)
    x_pre = phi @ x0 + d
    u = footstep_command(x_pre, policy)

    closure = np.abs(apply_impact(x_pre, u).as_array() - x0).max()
    if closure > 1e-9 * max(1.0, np.abs(x0).max()):
        logger.warning("periodic orbit closes with residual %.3g", closure)

    times = np.linspace(0.0, cfg.T, samples_per_step, endpoint=False)
    samples = np.array([continuous_stm(cfg, t) @ x0 + forced_response(cfg, 0.0, t) for t in times])
    return PeriodicOrbit(
        t=times.tolist(),
        x_sc=samples[:, 0].tolist(),
        l_s=samples[:, 1].tolist(),
        x_post=AlipState.from_array(x0),
        x_pre=AlipState.from_array(x_pre),
        u=u,
    )


@dataclass
class AlipTrace:
    t: List[float] = field(default_factory=list)
    x: List[np.ndarray] = field(default_factory=list)
    pre_impact: List[np.ndarray] = field(default_factory=list)
    commands: List[float] = field(default_factory=list)

    def states(self) -> np.ndarray:
        return np.array(self.x)


def simulate_hybrid_alip(
    x0: StateLike,
    policy: FootstepPolicy,
    cfg: GaitConfig,
    n_steps: int,
    *,
    samples_per_step: int = 10,
    t0: float = 0.0,
) -> AlipTrace:
    """Alternate continuous flow over [tau_k, tau_k + T) with fixed-time foot landings.

    x0 is the state just after the landing at t0.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    trace = AlipTrace()
    x = _vec(x0)
    offsets = np.linspace(0.0, cfg.T, max(samples_per_step, 1), endpoint=False)
    for step in range(n_steps):
        tau = t0 + step * cfg.T
        for dt in offsets:
            trace.t.append(float(tau + dt))
            trace.x.append(continuous_stm(cfg, float(dt)) @ x + forced_response(cfg, tau, tau + float(dt)))
        x_pre = continuous_stm(cfg, cfg.T) @ x + forced_response(cfg, tau, tau + cfg.T)
        if not np.all(np.isfinite(x_pre)) or np.linalg.norm(x_pre) > DIVERGENCE_NORM:
            raise AlipDivergedError(f"ALIP state diverged at step {step}: |x| = {np.linalg.norm(x_pre):.3g}")
        u = footstep_command(x_pre, policy)
        trace.pre_impact.append(x_pre)
        trace.commands.append(u)
        x = apply_impact(x_pre, u).as_array()
    trace.t.append(float(t0 + n_steps * cfg.T))
    trace.x.append(x)
    return trace
