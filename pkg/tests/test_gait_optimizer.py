from __future__ import annotations

import numpy as np
import pytest

from app.core.errors import EXIT_FAILURE
from app.schemas.gait import AlipState, FootstepPolicy, GaitConfig, SurfaceMotion
from app.schemas.optimizer import GaitStyle, OptimizerConfig
from app.services.alip.alip_service import continuous_stm, deadbeat_gain, monodromy
from app.services.alip.gait_optimizer_service import (
    InfeasibleGaitError,
    build_solution,
    constraint_violation,
    default_initial_guess,
    gait_style_targets,
    optimize_gait,
    policy_cost,
)

CASE_A = GaitConfig(T=0.4, surface=SurfaceMotion(amplitude=0.03, period=0.4))


def _check_solution(solution, opt: OptimizerConfig):
    policy = solution.policy
    assert solution.violation == 0.0
    assert solution.spectral_radius < opt.eigen_cap
    assert opt.u_min <= policy.u_star <= opt.u_max
    assert opt.x_min.x_sc <= policy.x_star.x_sc <= opt.x_max.x_sc
    assert opt.x_min.l_s <= policy.x_star.l_s <= opt.x_max.l_s
    eig = np.linalg.eigvals(monodromy(policy, solution.gait))
    assert np.max(np.abs(eig)) == pytest.approx(solution.spectral_radius, abs=1e-12)
    assert len(solution.eigenvalues) == 2


def test_case_a_solution_is_feasible(case_a_config, case_a_gait):
    _check_solution(case_a_gait, case_a_config.optimizer)
    assert case_a_gait.style is GaitStyle.FORWARD_WALK
    assert case_a_gait.policy.u_star > 0


def test_case_b_solution_is_feasible(case_b_config, case_b_gait):
    _check_solution(case_b_gait, case_b_config.optimizer)
    assert case_b_gait.style is GaitStyle.STEP_IN_PLACE
    assert abs(case_b_gait.policy.u_star) < 0.05


def test_solution_gain_is_smaller_than_deadbeat(case_a_config, case_a_gait):
    deadbeat = default_initial_guess(case_a_config.gait, case_a_config.optimizer)
    assert policy_cost(case_a_gait.policy) < policy_cost(deadbeat)


def test_reported_policy_lies_on_its_periodic_orbit(case_a_gait):
    # x* is polished onto the orbit where every step executes u*
    assert case_a_gait.consistency_residual < 1e-6
    assert case_a_gait.periodic_orbit.u == pytest.approx(case_a_gait.policy.u_star, abs=1e-6)


def test_style_targets():
    u_walk, _ = gait_style_targets(GaitStyle.FORWARD_WALK, CASE_A, nominal_stride=0.25)
    u_place, x_place = gait_style_targets(GaitStyle.STEP_IN_PLACE, CASE_A)
    assert u_walk == 0.25
    assert u_place == pytest.approx(0.0, abs=1e-12)
    assert isinstance(x_place, AlipState)


def test_deadbeat_guess_is_feasible():
    opt = OptimizerConfig()
    guess = default_initial_guess(CASE_A, opt)
    assert guess.K == deadbeat_gain(CASE_A)
    assert constraint_violation(guess, CASE_A, opt) == 0.0


def test_same_seed_gives_identical_solution():
    opt = OptimizerConfig(max_iters=300, n_starts=3)
    first = optimize_gait(CASE_A, opt, seed=7, max_workers=1)
    second = optimize_gait(CASE_A, opt, seed=7, max_workers=2)
    assert first.model_dump_json() == second.model_dump_json()


def test_unstable_guess_with_one_iteration_is_infeasible():
    zero = FootstepPolicy(K=(0.0, 0.0), u_star=0.2, x_star=AlipState(x_sc=0.0, l_s=0.0))
    opt = OptimizerConfig(initial_guess=zero, max_iters=1, n_starts=1)
    with pytest.raises(InfeasibleGaitError) as exc:
        optimize_gait(CASE_A, opt)
    assert exc.value.violation > 0
    assert exc.value.exit_code == EXIT_FAILURE


def test_build_solution_reports_violation_of_unstable_policy():
    opt = OptimizerConfig()
    policy = FootstepPolicy(K=(0.6, 0.0), u_star=0.2, x_star=AlipState(x_sc=0.1, l_s=5.0))
    assert constraint_violation(policy, CASE_A, opt) > 0
    guess = default_initial_guess(CASE_A, opt)
    solution = build_solution(guess, CASE_A, opt)
    assert solution.violation == 0.0
    assert solution.spectral_radius < 1e-4


def test_eigen_cap_bounds_are_validated():
    with pytest.raises(ValueError):
        OptimizerConfig(eigen_cap=1.5)
    with pytest.raises(ValueError):
        OptimizerConfig(u_min=0.5, u_max=0.1)


def _grid_best_gain(cfg: GaitConfig, cap: float):
    """Least |K|^2 meeting the eigenvalue cap on a grid: step 0.01 in K1 and in K2 * m H omega sinh(omega T)."""
    phi = continuous_stm(cfg, cfg.T)
    scale = cfg.m * cfg.H * cfg.omega * np.sinh(cfg.omega * cfg.T)
    k1, z2 = np.meshgrid(np.arange(0.0, 1.5, 0.01), np.arange(0.0, 3.0, 0.01), indexing="ij")
    k2 = z2 / scale
    # monodromy [[1 - k1, -k2], [0, 1]] @ phi
    trace = (1.0 - k1) * phi[0, 0] - k2 * phi[1, 0] + phi[1, 1]
    det = (1.0 - k1) * np.linalg.det(phi)
    root = np.sqrt((0.25 * trace**2 - det).astype(complex))
    radius = np.maximum(np.abs(0.5 * trace + root), np.abs(0.5 * trace - root))
    cost = np.where(radius < cap, k1**2 + k2**2, np.inf)
    i = np.unravel_index(np.argmin(cost), cost.shape)
    return float(cost[i]), (float(k1[i]), float(k2[i]))


def test_optimum_is_no_worse_than_grid_search(case_a_config, case_a_gait):
    cap = case_a_config.optimizer.eigen_cap
    best_cost, best_k = _grid_best_gain(case_a_config.gait, cap)
    assert np.isfinite(best_cost)
    assert case_a_gait.cost <= best_cost + 1e-9
    assert case_a_gait.policy.K[0] == pytest.approx(best_k[0], abs=0.02)


def test_tighter_eigen_cap_needs_larger_gain():
    tight = optimize_gait(CASE_A, OptimizerConfig(eigen_cap=0.3), seed=0, max_workers=1)
    loose = optimize_gait(CASE_A, OptimizerConfig(eigen_cap=0.69), seed=0, max_workers=1)
    assert tight.spectral_radius < 0.3
    assert tight.cost > loose.cost
    assert np.linalg.norm(tight.policy.K) > np.linalg.norm(loose.policy.K)
    # the cheapest gain puts the eigenvalues on the cap
    assert loose.spectral_radius == pytest.approx(0.69, abs=1e-3)
