from __future__ import annotations

import time

import pytest
from fastapi import HTTPException
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from app.api.routers.gaits import api_optimize
from app.api.routers.runs import api_get_run, api_list_runs
from app.api.routers import scenarios as scenarios_router
from app.core.database import make_engine, make_session_factory, session_scope
from app.core.errors import NumericalError
from app.db.base import Base
from app.db.init_db import init_db
from app.main import create_app
from app.repositories import run_repo
from app.repositories.audit_repo import list_events
from app.schemas.api import RunDetailOut, SimulateRequest
from app.tasks.background import map_ordered, submit


def _make_session():
    engine = create_engine("sqlite:///:memory:", connect_args={"check_same_thread": False})
    Base.metadata.create_all(bind=engine)
    Session = sessionmaker(bind=engine, autoflush=False, autocommit=False)
    return Session()


def _wait_for(factory, run_id, timeout=10.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        with session_scope(factory) as db:
            run = run_repo.get_run(db, run_id)
            if run.status in ("done", "failed"):
                return run.status, run.exit_code, dict(run.result_json), run.error
        time.sleep(0.02)
    raise AssertionError("background run did not finish")


def test_run_lifecycle_writes_audit_trail():
    db = _make_session()
    run = run_repo.open_run(db, kind="optimize", preset="caseA", seed=0, config={"a": 1})
    run_repo.close_run(db, run.id, result={"rho": 0.5})
    db.commit()

    assert run.status == "done" and run.exit_code == 0 and run.finished_at is not None
    actions = [ev.action for ev in list_events(db, run_id=run.id)]
    assert actions == ["optimize.started", "optimize.completed"]

    failed = run_repo.open_run(db, kind="simulate", preset=None, seed=1, config={})
    run_repo.close_run(db, failed.id, error="diverged", exit_code=3)
    db.commit()
    assert failed.status == "failed"
    assert list_events(db, run_id=failed.id)[-1].payload == {"exit_code": 3, "error": "diverged"}
    assert [r.id for r in run_repo.list_runs(db)] == [failed.id, run.id]
    assert [r.id for r in run_repo.list_runs(db, kind="optimize")] == [run.id]
    with pytest.raises(ValueError):
        run_repo.get_run(db, 999)


def test_map_ordered_keeps_submission_order():
    def slow_square(x):
        time.sleep(0.01 * (5 - x))
        return x * x

    assert map_ordered(slow_square, range(5), max_workers=3) == [0, 1, 4, 9, 16]
    assert map_ordered(slow_square, [], max_workers=3) == []


def test_background_jobs_close_their_runs(tmp_path):
    engine = make_engine(tmp_path)
    init_db(engine)
    factory = make_session_factory(engine)
    with session_scope(factory) as db:
        ok_id = run_repo.queue_run(db, kind="simulate", preset="caseA", seed=0, config={}).id
        bad_id = run_repo.queue_run(db, kind="simulate", preset="caseA", seed=0, config={}).id

    def boom():
        raise NumericalError("singular")

    submit(factory, ok_id, lambda: ({"steps": 3}, 1))
    submit(factory, bad_id, boom)

    assert _wait_for(factory, ok_id) == ("done", 1, {"steps": 3}, None)
    status, code, _, error = _wait_for(factory, bad_id)
    assert (status, code, error) == ("failed", 3, "singular")
    with session_scope(factory) as db:
        actions = [ev.action for ev in list_events(db, run_id=ok_id)]
    assert actions == ["simulate.queued", "simulate.started", "simulate.completed"]


def test_optimize_endpoint_records_the_run():
    db = _make_session()
    solution = api_optimize(config={"optimizer": {"max_iters": 200, "n_starts": 1}}, preset="caseB", db=db)
    assert solution.spectral_radius < solution.eigen_cap

    runs = api_list_runs(db=db)
    assert len(runs) == 1 and runs[0].status == "done"
    detail = RunDetailOut.model_validate(api_get_run(runs[0].id, db=db))
    assert [ev.action for ev in detail.events] == ["optimize.started", "optimize.completed"]
    assert detail.config_json["preset"] == "caseB"


def test_optimize_endpoint_reports_infeasible_and_bad_configs():
    db = _make_session()
    infeasible = {
        "optimizer": {
            "initial_guess": {"K": [0.0, 0.0], "u_star": 0.2, "x_star": {"x_sc": 0.0, "l_s": 0.0}},
            "max_iters": 1,
            "n_starts": 1,
        }
    }
    with pytest.raises(HTTPException) as exc:
        api_optimize(config=infeasible, preset="caseA", db=db)
    assert exc.value.status_code == 422
    assert exc.value.detail["violation"] > 0
    assert api_list_runs(db=db)[0].exit_code == 1

    with pytest.raises(HTTPException) as exc:
        api_optimize(config={"gait": {"T": 0.3}}, preset="caseA", db=db)
    assert exc.value.status_code in (422, 500)

    with pytest.raises(HTTPException) as exc:
        api_optimize(config={"bogus": 1}, preset=None, db=db)
    assert exc.value.status_code == 422

    with pytest.raises(HTTPException) as exc:
        api_get_run(12345, db=db)
    assert exc.value.status_code == 404


def test_simulate_endpoint_queues_a_background_job(tmp_path, monkeypatch):
    engine = make_engine(tmp_path)
    init_db(engine)
    factory = make_session_factory(engine)
    seen = {}

    def fake_job(cfg, gait, out_dir):
        seen["preset"] = cfg.preset
        seen["out_dir"] = out_dir
        return {"verdict": "pass"}, 0

    monkeypatch.setattr(scenarios_router, "simulate_job", fake_job)
    db = factory()
    try:
        queued = scenarios_router.api_simulate(
            SimulateRequest(preset="caseA", config={"output_dir": str(tmp_path)}), db=db, factory=factory
        )
    finally:
        db.close()

    assert queued.status == "pending"
    assert _wait_for(factory, queued.run_id)[:3] == ("done", 0, {"verdict": "pass"})
    assert seen["preset"] == "caseA"
    assert str(seen["out_dir"]).startswith(str(tmp_path))


def test_app_exposes_the_routes():
    paths = {route.path for route in create_app().routes}
    assert {"/api/gaits/optimize", "/api/scenarios/simulate", "/api/runs", "/api/runs/{run_id}"} <= paths
