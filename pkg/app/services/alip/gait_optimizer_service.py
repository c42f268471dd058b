"""Footstep-policy optimization.

Minimize |K|^2 over (K, u*, x*) subject to
    u_min <= u* <= u_max
    x_min <= x*  <= x_max
    |mu_i| <= eigen_cap - 1e-6 for both eigenvalues of the monodromy matrix.

Nelder-Mead on a scaled 5-vector with an exact penalty for the constraints, two
soft terms (x* on the orbit where u = u*, and u* near the gait-style target), a
deterministic multi-start and re-verification of the reported policy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from app.core.config import settings
from app.core.errors import EXIT_FAILURE, NumericalError
from app.schemas.gait import AlipState, FootstepPolicy, GaitConfig
from app.schemas.optimizer import GaitSolution, GaitStyle, OptimizerConfig
from app.services.alip.alip_service import (
    check_common_period,
    continuous_stm,
    deadbeat_gain,
    forced_response,
    monodromy,
    periodic_solution,
    self_consistent_preimpact,
)
from app.tasks.background import map_ordered

logger = logging.getLogger(__name__)

EIGEN_MARGIN = 1e-6


class InfeasibleGaitError(NumericalError):
    exit_code = EXIT_FAILURE

    def __init__(self, message: str, violation: float):
        super().__init__(message)
        self.violation = violation


def gait_style_targets(style: GaitStyle, cfg: GaitConfig, nominal_stride: float = 0.2) -> Tuple[float, AlipState]:
    """Seed (u*, x*) for a gait style; x* is the pre-impact state of the orbit that executes u* every step."""
    if style is GaitStyle.FORWARD_WALK:
        u_star = float(nominal_stride)
    else:
        # the foot lands on the same spot of the surface every step
        u_star = float(cfg.surface.position(cfg.T) - cfg.surface.position(0.0))
    return u_star, self_consistent_preimpact(u_star, cfg)


def _hinge(lo: float, v: float, hi: float) -> float:
    return max(0.0, lo - v) + max(0.0, v - hi)


def _bound_violation(policy: FootstepPolicy, opt: OptimizerConfig) -> float:
    x = policy.x_star
    return (
        _hinge(opt.u_min, policy.u_star, opt.u_max)
        + _hinge(opt.x_min.x_sc, x.x_sc, opt.x_max.x_sc)
        + _hinge(opt.x_min.l_s, x.l_s, opt.x_max.l_s)
    )


def _eigen_violation(eigenvalues: np.ndarray, cap: float) -> float:
    return float(np.sum(np.maximum(0.0, np.abs(eigenvalues) - (cap - EIGEN_MARGIN))))


def constraint_violation(policy: FootstepPolicy, cfg: GaitConfig, opt: OptimizerConfig) -> float:
    """Sum of hinge violations of the step bounds, the state bounds and the eigenvalue cap; 0 iff feasible."""
    eig = np.linalg.eigvals(monodromy(policy, cfg))
    return _bound_violation(policy, opt) + _eigen_violation(eig, opt.eigen_cap)


def policy_cost(policy: FootstepPolicy) -> float:
    k = policy.gain
    return float(k @ k)


class _Problem:
    """Scaled objective for one (cfg, opt) pair; monodromy pieces computed once."""

    def __init__(self, cfg: GaitConfig, opt: OptimizerConfig, u_target: float):
        self.cfg = cfg
        self.opt = opt
        self.u_target = u_target
        self.phi = continuous_stm(cfg, cfg.T)
        self.d = forced_response(cfg, 0.0, cfg.T)
        w = cfg.omega
        self.k2_scale = cfg.m * cfg.H * w * np.sinh(w * cfg.T)
        self.l_scale = cfg.m * cfg.H
        self._consistency_lhs = np.eye(2) - self.phi

    def encode(self, policy: FootstepPolicy) -> np.ndarray:
        k1, k2 = policy.K
        return np.array([k1, k2 * self.k2_scale, policy.u_star, policy.x_star.x_sc, policy.x_star.l_s / self.l_scale])

    def decode(self, z: np.ndarray) -> FootstepPolicy:
        return FootstepPolicy(
            K=(float(z[0]), float(z[1] / self.k2_scale)),
            u_star=float(z[2]),
            x_star=AlipState(x_sc=float(z[3]), l_s=float(z[4] * self.l_scale)),
        )

    def consistent_x(self, u_star: float) -> np.ndarray:
        return np.linalg.solve(self._consistency_lhs, self.d - self.phi @ np.array([u_star, 0.0]))

    def terms(self, z: np.ndarray) -> Tuple[float, float]:
        """(merit without penalty, violation) at scaled point z."""
        k1, k2 = z[0], z[1] / self.k2_scale
        u_star, x_sc, l_s = z[2], z[3], z[4] * self.l_scale
        reset = np.array([[1.0 - k1, -k2], [0.0, 1.0]])
        eig = np.linalg.eigvals(reset @ self.phi)
        opt = self.opt
        violation = (
            _hinge(opt.u_min, u_star, opt.u_max)
            + _hinge(opt.x_min.x_sc, x_sc, opt.x_max.x_sc)
            + _hinge(opt.x_min.l_s, l_s, opt.x_max.l_s)
            + _eigen_violation(eig, opt.eigen_cap)
        )
        x_target = self.consistent_x(u_star)
        gap = np.array([x_sc - x_target[0], (l_s - x_target[1]) / self.l_scale])
        merit = (
            k1 * k1
            + k2 * k2
            + opt.consistency_weight * float(gap @ gap)
            + opt.style_weight * (u_star - self.u_target) ** 2
        )
        return float(merit), float(violation)


@dataclass
class StartResult:
    index: int
    best_merit: Optional[float]
    best_z: Optional[np.ndarray]
    least_violation: float
    evaluations: int


def _run_start(problem: _Problem, index: int, z0: np.ndarray) -> StartResult:
    best: List = [None, None]
    least = [np.inf]
    count = [0]
    opt = problem.opt

    def objective(z: np.ndarray) -> float:
        merit, violation = problem.terms(z)
        count[0] += 1
        least[0] = min(least[0], violation)
        if violation == 0.0 and (best[0] is None or merit < best[0]):
            best[0], best[1] = merit, np.array(z, dtype=float)
        return merit + opt.penalty_weight * violation

    minimize(
        objective,
        z0,
        method="Nelder-Mead",
        options={
            "maxiter": opt.max_iters,
            "maxfev": 4 * opt.max_iters,
            "xatol": opt.tolerance,
            "fatol": opt.tolerance,
            "adaptive": True,
        },
    )
    logger.debug("start %d: %d evaluations, best merit %s", index, count[0], best[0])
    return StartResult(index=index, best_merit=best[0], best_z=best[1], least_violation=float(least[0]), evaluations=count[0])


def _start_points(problem: _Problem, guess: FootstepPolicy, n_starts: int, seed: int) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    z0 = problem.encode(guess)
    scale = np.array([0.3, 0.3, 0.05, 0.05, 0.1])
    points = [z0]
    for _ in range(n_starts - 1):
        points.append(z0 + scale * rng.standard_normal(5))
    return points


def default_initial_guess(cfg: GaitConfig, opt: OptimizerConfig) -> FootstepPolicy:
    u_star, x_star = gait_style_targets(opt.gait_style, cfg, opt.nominal_stride)
    return FootstepPolicy(K=deadbeat_gain(cfg), u_star=u_star, x_star=x_star)


def _polish(problem: _Problem, policy: FootstepPolicy) -> FootstepPolicy:
    """Move x* onto the orbit where u = u* when that keeps the policy feasible."""
    x = problem.consistent_x(policy.u_star)
    polished = policy.model_copy(update={"x_star": AlipState.from_array(x)})
    if _bound_violation(polished, problem.opt) == 0.0:
        return polished
    return policy


def build_solution(policy: FootstepPolicy, cfg: GaitConfig, opt: OptimizerConfig, *, samples_per_step: int = 100) -> GaitSolution:
    """Re-verify a policy from scratch and package it with its eigenvalues and periodic orbit."""
    eig = np.linalg.eigvals(monodromy(policy, cfg))
    violation = constraint_violation(policy, cfg, opt)
    orbit = periodic_solution(policy, cfg, samples_per_step=samples_per_step)
    residual = float(np.abs(orbit.x_pre.as_array() - policy.x_star.as_array()).max())
    return GaitSolution(
        gait=cfg,
        style=opt.gait_style,
        policy=policy,
        eigenvalues=[(float(e.real), float(e.imag)) for e in eig],
        spectral_radius=float(np.max(np.abs(eig))),
        cost=policy_cost(policy),
        violation=violation,
        consistency_residual=residual,
        periodic_orbit=orbit,
        eigen_cap=opt.eigen_cap,
    )


def optimize_gait(cfg: GaitConfig, opt: OptimizerConfig, *, seed: int = 0, max_workers: Optional[int] = None) -> GaitSolution:
    check_common_period(cfg)
    u_target, _ = gait_style_targets(opt.gait_style, cfg, opt.nominal_stride)
    problem = _Problem(cfg, opt, u_target)
    guess = opt.initial_guess or default_initial_guess(cfg, opt)
    starts = _start_points(problem, guess, opt.n_starts, seed)

    results = map_ordered(
        lambda item: _run_start(problem, item[0], item[1]),
        list(enumerate(starts)),
        max_workers=max_workers or settings.max_workers,
    )

    winner: Optional[StartResult] = None
    for res in results:
        if res.best_merit is None:
            continue
        # strict < keeps the smallest start index on ties
        if winner is None or res.best_merit < winner.best_merit:
            winner = res
    if winner is None:
        least = min(r.least_violation for r in results)
        raise InfeasibleGaitError(
            f"No feasible footstep policy found in {opt.n_starts} start(s) of {opt.max_iters} iterations; "
            f"best violation {least:.6g}",
            violation=least,
        )

    policy = _polish(problem, problem.decode(winner.best_z))
    solution = build_solution(policy, cfg, opt)
    if solution.violation > 0.0:
        raise InfeasibleGaitError(f"Reported policy fails re-verification (violation {solution.violation:.3g})", solution.violation)
    logger.info(
        "gait solved: K=(%.6g, %.6g) u*=%.4g rho=%.4g cost=%.6g (start %d)",
        policy.K[0],
        policy.K[1],
        policy.u_star,
        solution.spectral_radius,
        solution.cost,
        winner.index,
    )
    return solution
