import sys
from pathlib import Path

import numpy as np
import pytest


# Ensure `app` package is importable when running pytest from repo root.
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from app.schemas.robot import default_robot  # noqa: E402
from app.services.alip.gait_optimizer_service import optimize_gait  # noqa: E402
from app.services.config_service import build_run_config  # noqa: E402
from app.services.hybrid_sim_service import build_scenario, run_scenario, summarize  # noqa: E402

# full-order runs in the suite use a coarser physics step than the presets
TEST_DT = 5e-4
# enough steps for the 10..20 tracking window
TEST_STEPS = 22


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-order runs at the preset physics step")


@pytest.fixture(scope="session")
def robot():
    return default_robot()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def _case_config(name: str):
    return build_run_config({"scenario": {"physics_dt": TEST_DT, "duration_steps": TEST_STEPS}}, preset=name)


@pytest.fixture(scope="session")
def case_a_config():
    return _case_config("caseA")


@pytest.fixture(scope="session")
def case_b_config():
    return _case_config("caseB")


@pytest.fixture(scope="session")
def case_a_gait(case_a_config):
    return optimize_gait(case_a_config.gait, case_a_config.optimizer, seed=0)


@pytest.fixture(scope="session")
def case_b_gait(case_b_config):
    return optimize_gait(case_b_config.gait, case_b_config.optimizer, seed=0)


def _simulate(cfg, gait):
    scn = build_scenario(cfg.robot, gait, cfg.scenario)
    trace = run_scenario(scn)
    return scn, trace, summarize(trace, scn)


@pytest.fixture(scope="session")
def case_a_run(case_a_config, case_a_gait):
    return _simulate(case_a_config, case_a_gait)


@pytest.fixture(scope="session")
def case_b_run(case_b_config, case_b_gait):
    return _simulate(case_b_config, case_b_gait)
