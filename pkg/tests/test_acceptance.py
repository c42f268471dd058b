from __future__ import annotations

import math

import pytest

from app.schemas.gait import AlipState, FootstepPolicy
from app.services.acceptance_service import (
    CaseOutcome,
    FULL_ORDER_CRITERIA,
    contraction_ratio,
    dynamics_oracles,
    evaluate,
    evaluate_full_order,
    footstep_tracking_error,
    report_payload,
    run_case,
    trunk_perturbation_decay,
    uncontrolled_eigenvalues,
)
from app.services.config_service import build_run_config


def test_uncontrolled_eigenvalues(case_a_config):
    cfg = case_a_config.gait
    eig = uncontrolled_eigenvalues(cfg)
    assert eig[0] == pytest.approx(math.exp(-cfg.omega * cfg.T), abs=1e-6)
    assert eig[1] == pytest.approx(math.exp(cfg.omega * cfg.T), abs=1e-6)


@pytest.mark.parametrize("name", ["case_a_gait", "case_b_gait"])
def test_pendulum_contraction_matches_spectral_radius(name, request):
    gait = request.getfixturevalue(name)
    assert contraction_ratio(gait) <= gait.spectral_radius + 0.05


def test_trunk_error_decays_like_the_pd_loop(case_a_config, case_a_gait):
    out = trunk_perturbation_decay(case_a_config, case_a_gait)
    assert out["y2_start"] == pytest.approx(0.02, abs=1e-9)
    assert out["envelope_error"] <= 0.2
    assert abs(out["y2_end"]) < 0.01
    assert out["linearization_residual_max"] < 1e-4


def test_dynamics_oracles_on_a_small_sample(case_a_config):
    out = dynamics_oracles(case_a_config, n_states=5, passive_seconds=0.05)
    assert out["mass_matrix_positive_definite"]
    assert out["mass_matrix_asymmetry"] < 1e-12
    assert out["jacobian_fd_error"] < 1e-6
    assert out["passive_energy_drift"] < 1e-6


def test_footstep_tracking_on_simulated_case(case_a_config, case_a_gait, case_a_run):
    _, trace, summary = case_a_run
    case = CaseOutcome(preset="caseA", config=case_a_config, gait=case_a_gait, trace=trace, summary=summary)
    assert footstep_tracking_error(case) < 0.05
    assert footstep_tracking_error(case, first=50, last=60) == math.inf


def test_unstable_gait_fails_criteria_without_raising(case_b_config, case_b_gait):
    zero = FootstepPolicy(K=(0.0, 0.0), u_star=0.0, x_star=AlipState(x_sc=0.0, l_s=0.0))
    broken = case_b_gait.model_copy(update={"policy": zero})
    case = run_case(case_b_config, broken)
    assert case.error is not None
    assert case.summary is None

    results = evaluate([case], oracle_states=2, passive_seconds=0.01)
    by_number = {r.criterion: r for r in results}
    assert by_number[1].passed
    assert not by_number[2].passed
    assert not by_number[5].passed
    assert by_number[10].passed

    payload = report_payload(results)
    assert payload["passed"] is False
    assert [c["criterion"] for c in payload["criteria"]] == [r.criterion for r in results]


@pytest.mark.slow
@pytest.mark.parametrize("preset", ["caseA", "caseB"])
def test_preset_physics_step_meets_full_order_criteria(preset):
    cfg = build_run_config({}, preset=preset)
    assert cfg.scenario.physics_dt == pytest.approx(1e-4)
    assert cfg.scenario.duration_steps >= 20
    case = run_case(cfg)
    assert case.error is None
    result = evaluate_full_order(case)
    assert result.criterion == FULL_ORDER_CRITERIA[preset]
    assert result.passed, result.measured
    assert case.summary["steps_completed"] >= 20
    assert case.summary["max_abs_x_sc"] <= 0.7
    assert case.summary["max_abs_l_s"] <= 40.0
    assert case.summary["preimpact_deviation_max"] < 0.05
    assert footstep_tracking_error(case, first=10, last=20) < 0.05
