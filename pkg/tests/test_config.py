from __future__ import annotations

import json

import pytest

from app.core.config import Settings
from app.core.errors import EXIT_CONFIG, EXIT_FAILURE, EXIT_NUMERICAL, ConfigError, NumericalError, exit_code_for
from app.core.presets import preset_dict
from app.schemas.robot import LinkSpec, RobotModel, StanceLeg, default_robot
from app.schemas.run_config import RunConfig
from app.services.alip.gait_optimizer_service import InfeasibleGaitError
from app.services.config_service import (
    build_run_config,
    dump_run_config,
    load_gait_solution,
    load_run_config,
    save_gait_solution,
)


def test_presets_fill_both_cases():
    a = build_run_config(preset="caseA")
    b = build_run_config(preset="caseB")
    assert a.preset == "caseA" and b.preset == "caseB"
    assert a.gait.T == 0.4 and a.gait.surface.period == 0.4
    assert b.gait.T == 0.2 and b.gait.surface.period == 0.2
    assert a.optimizer.gait_style.value == "ForwardWalk"
    assert b.optimizer.gait_style.value == "StepInPlace"
    assert a.scenario.gains.kp == 2500.0 and a.scenario.gains.kd == 100.0
    assert a.optimizer.eigen_cap == 0.69


def test_file_sections_merge_over_preset(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({"preset": "caseA", "scenario": {"duration_steps": 5}}), encoding="utf-8")
    cfg = load_run_config(p)
    assert cfg.scenario.duration_steps == 5
    assert cfg.scenario.gains.kp == 2500.0
    # command-line overrides win over the file, --preset wins over the file's preset
    cfg = load_run_config(p, preset="caseB", overrides={"scenario": {"physics_dt": 5e-4}, "seed": 3})
    assert cfg.preset == "caseB" and cfg.gait.T == 0.2
    assert cfg.scenario.physics_dt == 5e-4 and cfg.scenario.duration_steps == 5
    assert cfg.seed == 3


def test_dump_and_load_give_back_the_config(tmp_path):
    cfg = build_run_config({"seed": 11}, preset="caseB")
    p = tmp_path / "cfg.json"
    p.write_text(dump_run_config(cfg), encoding="utf-8")
    assert load_run_config(p) == cfg


@pytest.mark.parametrize(
    "data",
    [
        {"gait": {"T": -0.4}},
        {"gait": {"stride": 0.3}},
        {"optimizer": {"eigen_cap": 1.2}},
        {"scenario": {"physics_dt": 0.01}},
        {"preset": "caseZ"},
    ],
)
def test_invalid_configs_raise_config_error(data):
    with pytest.raises(ConfigError):
        build_run_config(data)


def test_unreadable_files_raise_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(bad)
    with pytest.raises(ConfigError):
        load_gait_solution(bad)
    partial = tmp_path / "gait.json"
    partial.write_text(json.dumps({"policy": {"K": [1, 2]}}), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_gait_solution(partial)


def test_gait_file_round_trip(tmp_path, case_b_gait):
    p = save_gait_solution(case_b_gait, tmp_path / "gait.json")
    assert load_gait_solution(p) == case_b_gait


def test_link_defaults_are_thin_rods():
    link = LinkSpec(name="trunk", mass=12.0, length=0.5)
    assert link.com_offset == pytest.approx(0.25)
    assert link.inertia_zz == pytest.approx(12.0 * 0.25 / 12.0)
    with pytest.raises(ValueError):
        LinkSpec(name="trunk", mass=1.0, length=0.5, com_offset=0.8)


def test_robot_links_must_be_ordered():
    links = list(default_robot().links)
    links[1], links[3] = links[3], links[1]
    with pytest.raises(ValueError):
        RobotModel(links=tuple(links))
    assert default_robot().total_mass == pytest.approx(39.2)
    assert StanceLeg.LEFT.other is StanceLeg.RIGHT


def test_preset_dict_rejects_unknown_names():
    with pytest.raises(KeyError):
        preset_dict("caseC")


def test_exit_codes_follow_error_roots():
    assert exit_code_for(ConfigError("x")) == EXIT_CONFIG
    assert exit_code_for(NumericalError("x")) == EXIT_NUMERICAL
    assert exit_code_for(InfeasibleGaitError("x", 0.3)) == EXIT_FAILURE
    assert exit_code_for(RuntimeError("x")) == EXIT_NUMERICAL


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv("DRSWALK_MAX_WORKERS", "5")
    monkeypatch.setenv("DRSWALK_OUTPUT_DIR", "elsewhere")
    s = Settings()
    assert s.max_workers == 5
    assert s.output_dir == "elsewhere"
    assert isinstance(RunConfig().seed, int)
