from __future__ import annotations

from datetime import datetime
from typing import Any, Dict, List, Optional

from sqlalchemy.orm import Session

from app.db.models import RunRecord
from app.repositories.audit_repo import log_event


def open_run(db: Session, *, kind: str, preset: Optional[str], seed: int, config: Dict[str, Any]) -> RunRecord:
    run = RunRecord(kind=kind, status="running", preset=preset, seed=seed, config_json=config)
    db.add(run)
    db.flush()
    log_event(db, run_id=run.id, action=f"{kind}.started", entity_type="run", entity_id=str(run.id))
    return run


def queue_run(db: Session, *, kind: str, preset: Optional[str], seed: int, config: Dict[str, Any]) -> RunRecord:
    run = RunRecord(kind=kind, status="pending", preset=preset, seed=seed, config_json=config)
    db.add(run)
    db.flush()
    log_event(db, run_id=run.id, action=f"{kind}.queued", entity_type="run", entity_id=str(run.id))
    return run


def mark_running(db: Session, run_id: int) -> RunRecord:
    run = get_run(db, run_id)
    run.status = "running"
    log_event(db, run_id=run.id, action=f"{run.kind}.started", entity_type="run", entity_id=str(run.id))
    db.flush()
    return run


def close_run(
    db: Session,
    run_id: int,
    *,
    result: Optional[Dict[str, Any]] = None,
    error: Optional[str] = None,
    exit_code: int = 0,
) -> RunRecord:
    run = get_run(db, run_id)
    run.status = "failed" if error else "done"
    run.result_json = result or {}
    run.error = error
    run.exit_code = exit_code
    run.finished_at = datetime.utcnow()
    action = f"{run.kind}.failed" if error else f"{run.kind}.completed"
    log_event(
        db,
        run_id=run.id,
        action=action,
        entity_type="run",
        entity_id=str(run.id),
        payload={"exit_code": exit_code, "error": error} if error else {"exit_code": exit_code},
    )
    db.flush()
    return run


def get_run(db: Session, run_id: int) -> RunRecord:
    run = db.query(RunRecord).filter(RunRecord.id == run_id).first()
    if not run:
        raise ValueError("Run not found")
    return run


def list_runs(db: Session, *, kind: str = "", limit: int = 100) -> List[RunRecord]:
    q = db.query(RunRecord)
    if kind:
        q = q.filter(RunRecord.kind == kind)
    return q.order_by(RunRecord.id.desc()).limit(limit).all()
