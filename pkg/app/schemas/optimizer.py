from __future__ import annotations

from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .gait import AlipState, FootstepPolicy, GaitConfig


class GaitStyle(str, Enum):
    FORWARD_WALK = "ForwardWalk"
    STEP_IN_PLACE = "StepInPlace"


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    u_min: float = -0.7
    u_max: float = 0.7
    x_min: AlipState = AlipState(x_sc=-0.7, l_s=-40.0)
    x_max: AlipState = AlipState(x_sc=0.7, l_s=40.0)
    eigen_cap: float = Field(0.69, gt=0, lt=1)
    gait_style: GaitStyle = GaitStyle.FORWARD_WALK
    # None -> deadbeat gain with the style targets
    initial_guess: Optional[FootstepPolicy] = None
    max_iters: int = Field(4000, ge=1)
    tolerance: float = Field(1e-10, gt=0)

    n_starts: int = Field(4, ge=1)
    nominal_stride: float = 0.2
    # weights of the soft terms; 0 switches a term off
    consistency_weight: float = Field(100.0, ge=0)
    style_weight: float = Field(10.0, ge=0)
    penalty_weight: float = Field(10.0, gt=0)

    @model_validator(mode="after")
    def _ordered_bounds(self) -> "OptimizerConfig":
        if not self.u_min < self.u_max:
            raise ValueError("u_min must be < u_max")
        if not (self.x_min.x_sc < self.x_max.x_sc and self.x_min.l_s < self.x_max.l_s):
            raise ValueError("x_min must be componentwise < x_max")
        return self


class PeriodicOrbit(BaseModel):
    """Sampled T-periodic solution on [0, T) plus its post/pre-impact endpoints."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    t: List[float]
    x_sc: List[float]
    l_s: List[float]
    x_post: AlipState
    x_pre: AlipState
    u: float


class GaitSolution(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    gait: GaitConfig
    style: GaitStyle
    policy: FootstepPolicy
    # (real, imag) pairs
    eigenvalues: List[Tuple[float, float]]
    spectral_radius: float
    cost: float
    violation: float = 0.0
    # |x_pre(orbit) - x_star|
    consistency_residual: float = 0.0
    periodic_orbit: PeriodicOrbit
    eigen_cap: float
