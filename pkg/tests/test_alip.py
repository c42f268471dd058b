from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from app.core.errors import ConfigError
from app.schemas.gait import AlipState, FootstepPolicy, GaitConfig, SurfaceMotion
from app.services.alip.alip_service import (
    AlipDivergedError,
    NoStablePeriodicSolutionError,
    SurfacePeriodError,
    alip_vector_field,
    apply_impact,
    check_common_period,
    continuous_stm,
    deadbeat_gain,
    footstep_command,
    forced_response,
    monodromy,
    monodromy_eigenvalues,
    periodic_solution,
    predict_preimpact,
    self_consistent_preimpact,
    simulate_hybrid_alip,
    spectral_radius,
    system_matrix,
)

CASE_A = GaitConfig(T=0.4, surface=SurfaceMotion(amplitude=0.03, period=0.4))
CASE_B = GaitConfig(T=0.2, surface=SurfaceMotion(amplitude=0.03, period=0.2))


def _policy(cfg: GaitConfig, u_star: float = 0.2, K=None) -> FootstepPolicy:
    return FootstepPolicy(
        K=K if K is not None else deadbeat_gain(cfg),
        u_star=u_star,
        x_star=self_consistent_preimpact(u_star, cfg),
    )


def _half_gain(cfg: GaitConfig):
    """Gain giving monodromy eigenvalues +-0.5i."""
    return 0.75, 1.25 * deadbeat_gain(cfg)[1]


@pytest.mark.parametrize("t", [0.0, 0.05, 0.2, 0.4, 1.0])
def test_state_transition_matches_matrix_exponential(t):
    phi = continuous_stm(CASE_A, t)
    assert np.allclose(phi, expm(system_matrix(CASE_A) * t), rtol=1e-10, atol=1e-10)
    assert np.linalg.det(phi) == pytest.approx(1.0, abs=1e-9)


def test_forced_response_matches_ode_solution():
    cfg = CASE_A
    t0, t1 = 0.13, 0.53
    sol = solve_ivp(lambda t, x: alip_vector_field(x, t, cfg), (t0, t1), [0.0, 0.0], rtol=1e-11, atol=1e-13)
    assert np.allclose(forced_response(cfg, t0, t1), sol.y[:, -1], rtol=1e-7, atol=1e-10)


def test_forced_response_vanishes_on_static_surface():
    cfg = GaitConfig(T=0.4)
    assert np.array_equal(forced_response(cfg, 0.0, 0.4), np.zeros(2))


def test_prediction_composes_over_split_windows():
    x0 = AlipState(x_sc=-0.05, l_s=3.0)
    direct = predict_preimpact(x0, 0.0, 0.35, CASE_A)
    mid = predict_preimpact(x0, 0.0, 0.1, CASE_A)
    split = predict_preimpact(mid, 0.1, 0.35, CASE_A)
    assert np.allclose(direct.as_array(), split.as_array(), rtol=1e-9, atol=1e-12)
    with pytest.raises(ValueError):
        predict_preimpact(x0, 0.3, 0.1, CASE_A)


def test_uncontrolled_pendulum_is_unstable():
    zero = FootstepPolicy(K=(0.0, 0.0), u_star=0.0, x_star=AlipState(x_sc=0.0, l_s=0.0))
    for cfg in (CASE_A, CASE_B):
        eig = np.sort(np.abs(monodromy_eigenvalues(zero, cfg)))
        expected = [math.exp(-cfg.omega * cfg.T), math.exp(cfg.omega * cfg.T)]
        assert np.allclose(eig, expected, atol=1e-6)


def test_deadbeat_gain_places_eigenvalues_at_zero():
    for cfg in (CASE_A, CASE_B):
        M = monodromy(_policy(cfg), cfg)
        assert abs(np.trace(M)) < 1e-9
        assert abs(np.linalg.det(M)) < 1e-9


def test_half_gain_has_expected_spectral_radius():
    for cfg in (CASE_A, CASE_B):
        policy = _policy(cfg, K=_half_gain(cfg))
        assert spectral_radius(monodromy(policy, cfg)) == pytest.approx(0.5, abs=1e-9)


def test_impact_moves_contact_and_keeps_momentum():
    post = apply_impact([0.12, 7.5], 0.3)
    assert post.x_sc == pytest.approx(-0.18)
    assert post.l_s == 7.5


def test_footstep_command_is_affine_in_preimpact_state():
    policy = FootstepPolicy(K=(0.5, 0.01), u_star=0.2, x_star=AlipState(x_sc=0.1, l_s=5.0))
    assert footstep_command(policy.x_star, policy) == pytest.approx(0.2)
    assert footstep_command([0.2, 6.0], policy) == pytest.approx(0.2 + 0.5 * 0.1 + 0.01 * 1.0)


def test_common_period_is_required():
    check_common_period(GaitConfig(T=0.3))
    check_common_period(GaitConfig(T=0.4, surface=SurfaceMotion(amplitude=0.03, period=0.2)))
    with pytest.raises(SurfacePeriodError):
        check_common_period(GaitConfig(T=0.3, surface=SurfaceMotion(amplitude=0.03, period=0.2)))
    assert issubclass(SurfacePeriodError, ConfigError)


@pytest.mark.parametrize("cfg", [CASE_A, CASE_B])
def test_periodic_orbit_closes_under_hybrid_flow(cfg):
    policy = _policy(cfg, K=_half_gain(cfg))
    orbit = periodic_solution(policy, cfg, samples_per_step=20)
    assert len(orbit.t) == 20
    assert orbit.x_pre.x_sc == pytest.approx(policy.x_star.x_sc, abs=1e-9)
    assert orbit.x_pre.l_s == pytest.approx(policy.x_star.l_s, abs=1e-7)
    assert orbit.u == pytest.approx(policy.u_star, abs=1e-9)

    trace = simulate_hybrid_alip(orbit.x_post, policy, cfg, 10, samples_per_step=2)
    for x_pre, u in zip(trace.pre_impact, trace.commands):
        assert np.allclose(x_pre, orbit.x_pre.as_array(), atol=1e-7)
        assert u == pytest.approx(orbit.u, abs=1e-8)


def test_perturbation_decays_under_stable_policy():
    cfg = CASE_A
    policy = _policy(cfg, K=_half_gain(cfg))
    orbit = periodic_solution(policy, cfg, samples_per_step=2)
    rho = spectral_radius(monodromy(policy, cfg))
    assert rho < 1.0
    trace = simulate_hybrid_alip(orbit.x_post.as_array() + [0.05, 0.0], policy, cfg, 30, samples_per_step=1)
    dev = [np.linalg.norm((x - orbit.x_pre.as_array()) * [1.0, 1.0 / (cfg.m * cfg.H)]) for x in trace.pre_impact]
    assert dev[-1] < 1e-2 * dev[0]
    assert (dev[29] / dev[19]) ** 0.1 <= rho + 0.05


def test_hybrid_trace_records_each_landing():
    cfg = CASE_B
    policy = _policy(cfg, u_star=0.0)
    trace = simulate_hybrid_alip([0.01, 0.5], policy, cfg, 4, samples_per_step=5)
    assert len(trace.pre_impact) == len(trace.commands) == 4
    assert len(trace.t) == 4 * 5 + 1
    last = apply_impact(trace.pre_impact[-1], trace.commands[-1]).as_array()
    assert np.allclose(trace.states()[-1], last)


def test_unstable_policy_has_no_periodic_solution_and_diverges():
    zero = FootstepPolicy(K=(0.0, 0.0), u_star=0.0, x_star=AlipState(x_sc=0.0, l_s=0.0))
    with pytest.raises(NoStablePeriodicSolutionError):
        periodic_solution(zero, CASE_A)
    with pytest.raises(AlipDivergedError):
        simulate_hybrid_alip([0.1, 0.0], zero, CASE_A, 60, samples_per_step=1)
