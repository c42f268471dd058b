from __future__ import annotations

from fastapi import APIRouter, Depends, HTTPException
from sqlalchemy.orm import Session, sessionmaker

from app.api.deps import get_db, get_session_factory
from app.core.errors import ConfigError
from app.core.paths import output_root
from app.repositories import run_repo
from app.schemas.api import QueuedRun, SimulateRequest
from app.services.config_service import build_run_config
from app.services.run_service import simulate_job
from app.tasks.background import submit

router = APIRouter(prefix="/scenarios", tags=["scenarios"])


@router.post("/simulate", response_model=QueuedRun, status_code=202)
def api_simulate(
    payload: SimulateRequest,
    db: Session = Depends(get_db),
    factory: sessionmaker = Depends(get_session_factory),
):
    try:
        cfg = build_run_config(payload.config, preset=payload.preset)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e))

    run = run_repo.queue_run(db, kind="simulate", preset=cfg.preset, seed=cfg.seed, config=cfg.model_dump(mode="json"))
    db.commit()
    out_dir = output_root(cfg.output_dir) / f"run_{run.id:05d}"
    submit(factory, run.id, simulate_job, cfg, payload.gait, out_dir)
    return QueuedRun(run_id=run.id, status=run.status, output_dir=str(out_dir))
