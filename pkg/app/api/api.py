from __future__ import annotations

from fastapi import APIRouter

from app.api.routers.gaits import router as gaits
from app.api.routers.runs import router as runs
from app.api.routers.scenarios import router as scenarios

api_router = APIRouter(prefix="/api")
api_router.include_router(gaits)
api_router.include_router(scenarios)
api_router.include_router(runs)
