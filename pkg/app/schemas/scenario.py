from __future__ import annotations

from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .gait import SurfaceMotion
from .optimizer import GaitSolution
from .robot import RobotModel, StanceLeg


class ControlGains(BaseModel):
    """PD gains of the linearized outputs: y'' + kd y' + kp y = 0."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kp: float = Field(2500.0, gt=0)
    kd: float = Field(100.0, gt=0)


class PatternConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # vertical swing-foot profile, both endpoints on the surface
    phi4: Tuple[float, ...] = (0.0, 0.075, 0.05, 0.045, 0.05, 0.075, 0.0)
    phi3_order: int = Field(6, ge=1)
    trunk_pitch: float = 0.0

    @field_validator("phi4")
    @classmethod
    def _lands_on_surface(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(v) < 2:
            raise ValueError("phi4 needs at least two coefficients")
        if v[0] != 0.0 or v[-1] != 0.0:
            raise ValueError("phi4 must start and end at 0")
        return v


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    duration_steps: int = Field(20, ge=0)
    physics_dt: float = Field(1e-4, gt=0, le=1e-3)
    planner_rate: float = Field(100.0, gt=0)
    gains: ControlGains = ControlGains()
    pattern: PatternConfig = PatternConfig()
    start_stance: StanceLeg = StanceLeg.LEFT
    # swing-foot touchdown is accepted only past this phase; None disables the guard
    min_switch_phase: Optional[float] = Field(0.5, ge=0, le=1)
    divergence_limit: float = Field(1e4, gt=0)
    # world surface; None means the surface the gait was planned for
    surface: Optional[SurfaceMotion] = None
    # verdict envelope on the reduced state
    envelope_x_sc: float = Field(0.7, gt=0)
    envelope_l_s: float = Field(40.0, gt=0)
    # give up after this many step periods without completing duration_steps
    time_cap_factor: float = Field(3.0, gt=1)


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    gait: GaitSolution
    robot: RobotModel
    surface: SurfaceMotion
    config: ScenarioConfig = ScenarioConfig()

    @property
    def duration_steps(self) -> int:
        return self.config.duration_steps

    @property
    def physics_dt(self) -> float:
        return self.config.physics_dt

    @property
    def planner_rate(self) -> float:
        return self.config.planner_rate
