from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .gait import GaitConfig
from .optimizer import OptimizerConfig
from .robot import RobotModel, default_robot
from .scenario import ScenarioConfig


PresetId = Literal["caseA", "caseB", "custom"]


class RunConfig(BaseModel):
    """Everything one CLI or API run needs; one JSON file with nested sections."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    preset: PresetId = "custom"
    robot: RobotModel = Field(default_factory=default_robot)
    gait: GaitConfig = GaitConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    scenario: ScenarioConfig = ScenarioConfig()
    output_dir: Optional[str] = None
    seed: int = 0
