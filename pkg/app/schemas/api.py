from __future__ import annotations

from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from .optimizer import GaitSolution


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # raw RunConfig sections; merged over the preset before validation
    config: Dict[str, Any] = Field(default_factory=dict)
    preset: Optional[str] = None
    # optimized first when omitted
    gait: Optional[GaitSolution] = None


class QueuedRun(BaseModel):
    run_id: int
    status: str
    output_dir: str


class AuditEventOut(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    id: int
    action: str
    entity_type: Optional[str] = None
    entity_id: Optional[str] = None
    actor: Optional[str] = None
    payload: Dict[str, Any] = Field(default_factory=dict)
    created_at: datetime


class RunOut(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    id: int
    kind: str
    status: str
    preset: Optional[str] = None
    seed: int
    result_json: Dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None
    exit_code: Optional[int] = None
    created_at: datetime
    finished_at: Optional[datetime] = None


class RunDetailOut(RunOut):
    config_json: Dict[str, Any] = Field(default_factory=dict)
    events: List[AuditEventOut] = Field(default_factory=list)
