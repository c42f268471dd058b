from __future__ import annotations

import math
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class SurfaceMotion(BaseModel):
    """Horizontal sway of the walking surface: x_S(t) = amplitude * sin(2*pi*t/period + phase)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    amplitude: float = 0.0
    period: float = Field(1.0, gt=0)
    phase: float = 0.0

    @property
    def angular_rate(self) -> float:
        return 2.0 * math.pi / self.period

    @property
    def is_static(self) -> bool:
        return self.amplitude == 0.0

    def position(self, t):
        return self.amplitude * np.sin(self.angular_rate * t + self.phase)

    def velocity(self, t):
        w = self.angular_rate
        return self.amplitude * w * np.cos(w * t + self.phase)

    def acceleration(self, t):
        w = self.angular_rate
        return -self.amplitude * w * w * np.sin(w * t + self.phase)


class GaitConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    H: float = Field(0.81, gt=0)
    T: float = Field(0.4, gt=0)
    m: float = Field(39.8, gt=0)
    g: float = Field(9.81, gt=0)
    surface: SurfaceMotion = SurfaceMotion()

    @property
    def omega(self) -> float:
        return math.sqrt(self.g / self.H)


class AlipState(BaseModel):
    """Reduced-order state: CoM position relative to the contact point, angular momentum about it."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    x_sc: float
    l_s: float

    @field_validator("x_sc", "l_s")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("AlipState entries must be finite")
        return v

    def as_array(self) -> np.ndarray:
        return np.array([self.x_sc, self.l_s], dtype=float)

    @classmethod
    def from_array(cls, x) -> "AlipState":
        return cls(x_sc=float(x[0]), l_s=float(x[1]))


class FootstepPolicy(BaseModel):
    """u = u_star + K (x_pre - x_star)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    K: Tuple[float, float]
    u_star: float
    x_star: AlipState

    @field_validator("K")
    @classmethod
    def _finite_gain(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if not all(math.isfinite(k) for k in v):
            raise ValueError("K must be finite")
        return v

    @field_validator("u_star")
    @classmethod
    def _finite_step(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("u_star must be finite")
        return v

    @property
    def gain(self) -> np.ndarray:
        return np.array(self.K, dtype=float)
