from __future__ import annotations

from typing import List

from fastapi import APIRouter, Depends, HTTPException
from sqlalchemy.orm import Session

from app.api.deps import get_db
from app.repositories import run_repo
from app.schemas.api import RunDetailOut, RunOut

router = APIRouter(prefix="/runs", tags=["runs"])


@router.get("", response_model=List[RunOut])
def api_list_runs(kind: str = "", limit: int = 100, db: Session = Depends(get_db)):
    return run_repo.list_runs(db, kind=kind, limit=min(limit, 1000))


@router.get("/{run_id}", response_model=RunDetailOut)
def api_get_run(run_id: int, db: Session = Depends(get_db)):
    try:
        return run_repo.get_run(db, run_id)
    except ValueError as e:
        raise HTTPException(status_code=404, detail=str(e))
