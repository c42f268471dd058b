from __future__ import annotations

from typing import Any, Dict, List, Optional

from sqlalchemy.orm import Session

from app.db.models import AuditEvent


def log_event(
    db: Session,
    *,
    run_id: Optional[int],
    action: str,
    entity_type: Optional[str] = None,
    entity_id: Optional[str] = None,
    actor: Optional[str] = "system",
    payload: Optional[Dict[str, Any]] = None,
) -> AuditEvent:
    ev = AuditEvent(
        run_id=run_id,
        action=action,
        entity_type=entity_type,
        entity_id=entity_id,
        actor=actor,
        payload=payload or {},
    )
    db.add(ev)
    db.flush()
    return ev


def list_events(db: Session, *, run_id: Optional[int] = None, action: str = "", limit: int = 500) -> List[AuditEvent]:
    q = db.query(AuditEvent)
    if run_id is not None:
        q = q.filter(AuditEvent.run_id == run_id)
    if action:
        q = q.filter(AuditEvent.action.ilike(f"%{action}%"))
    return q.order_by(AuditEvent.id.asc()).limit(limit).all()
