from __future__ import annotations

import json

import pandas as pd
import pytest
from sqlalchemy.orm import Session

from app.cli import main
from app.core.database import make_engine
from app.core.errors import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK
from app.repositories import run_repo
from app.services.config_service import save_gait_solution


def _runs(out_dir):
    with Session(make_engine(out_dir)) as db:
        return [(r.kind, r.status, r.exit_code, dict(r.result_json)) for r in run_repo.list_runs(db)]


def test_optimize_writes_identical_gait_files_for_the_same_seed(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["optimize", "--preset", "caseB", "--seed", "4", "--out", str(a)]) == EXIT_OK
    assert main(["optimize", "--preset", "caseB", "--seed", "4", "--out", str(b)]) == EXIT_OK
    assert (a / "gait.json").read_bytes() == (b / "gait.json").read_bytes()
    kind, status, code, result = _runs(a)[0]
    assert (kind, status, code) == ("optimize", "done", 0)
    assert result["spectral_radius"] < 0.69


def test_infeasible_optimization_exits_with_violation(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "preset": "caseA",
                "optimizer": {
                    "initial_guess": {"K": [0.0, 0.0], "u_star": 0.2, "x_star": {"x_sc": 0.0, "l_s": 0.0}},
                    "max_iters": 1,
                    "n_starts": 1,
                },
            }
        ),
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert main(["optimize", "--config", str(cfg), "--out", str(out)]) == EXIT_FAILURE
    assert not (out / "gait.json").exists()
    kind, status, code, result = _runs(out)[0]
    assert (kind, status, code) == ("optimize", "failed", EXIT_FAILURE)
    assert result["violation"] > 0


def test_corrupted_gait_file_is_a_config_error_without_outputs(tmp_path):
    gait = tmp_path / "gait.json"
    gait.write_text('{"policy": ', encoding="utf-8")
    out = tmp_path / "out"
    assert main(["simulate", "--preset", "caseA", "--gait", str(gait), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_missing_config_file_is_a_config_error(tmp_path):
    out = tmp_path / "out"
    assert main(["optimize", "--config", str(tmp_path / "nope.json"), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_unknown_preset_is_rejected_by_the_parser():
    with pytest.raises(SystemExit) as exc:
        main(["optimize", "--preset", "caseQ"])
    assert exc.value.code == 2


def test_simulate_writes_trace_impacts_and_summary(tmp_path, case_b_gait):
    gait = save_gait_solution(case_b_gait, tmp_path / "gait.json")
    out = tmp_path / "out"
    code = main(["simulate", "--preset", "caseB", "--gait", str(gait), "--steps", "2", "--dt", "5e-4", "--out", str(out)])
    assert code == EXIT_OK
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["steps_completed"] == 2
    assert summary["verdict"] == "pass"
    trace = pd.read_csv(out / "trace.csv")
    assert len(trace) > 0 and trace.columns[0] == "t"
    assert len(pd.read_csv(out / "impacts.csv")) == 2
    assert _runs(out)[0][:3] == ("simulate", "done", 0)


def test_zero_step_simulation_is_a_vacuous_pass(tmp_path, case_b_gait):
    gait = save_gait_solution(case_b_gait, tmp_path / "gait.json")
    out = tmp_path / "out"
    assert main(["simulate", "--preset", "caseB", "--gait", str(gait), "--steps", "0", "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["steps_completed"] == 0 and summary["verdict"] == "pass"


def test_verify_rejects_a_gait_for_several_cases(tmp_path, case_b_gait):
    gait = save_gait_solution(case_b_gait, tmp_path / "gait.json")
    assert main(["verify", "--gait", str(gait), "--out", str(tmp_path / "out")]) == EXIT_CONFIG
