from __future__ import annotations

from typing import Any, Dict, Optional

from fastapi import APIRouter, Body, Depends, HTTPException
from sqlalchemy.orm import Session

from app.api.deps import get_db
from app.core.errors import ConfigError, NumericalError, exit_code_for
from app.repositories import run_repo
from app.schemas.optimizer import GaitSolution
from app.services.alip.gait_optimizer_service import InfeasibleGaitError, optimize_gait
from app.services.config_service import build_run_config

router = APIRouter(prefix="/gaits", tags=["gaits"])


@router.post("/optimize", response_model=GaitSolution)
def api_optimize(config: Dict[str, Any] = Body(default={}), preset: Optional[str] = None, db: Session = Depends(get_db)):
    try:
        cfg = build_run_config(config, preset=preset)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e))

    run = run_repo.open_run(db, kind="optimize", preset=cfg.preset, seed=cfg.seed, config=cfg.model_dump(mode="json"))
    db.commit()
    try:
        solution = optimize_gait(cfg.gait, cfg.optimizer, seed=cfg.seed)
    except InfeasibleGaitError as e:
        run_repo.close_run(db, run.id, result={"violation": e.violation}, error=str(e), exit_code=e.exit_code)
        db.commit()
        raise HTTPException(status_code=422, detail={"message": str(e), "violation": e.violation, "run_id": run.id})
    except (ConfigError, NumericalError) as e:
        run_repo.close_run(db, run.id, error=str(e), exit_code=exit_code_for(e))
        db.commit()
        raise HTTPException(status_code=422 if isinstance(e, ConfigError) else 500, detail=str(e))

    run_repo.close_run(
        db,
        run.id,
        result={"K": list(solution.policy.K), "u_star": solution.policy.u_star, "spectral_radius": solution.spectral_radius},
    )
    db.commit()
    return solution
