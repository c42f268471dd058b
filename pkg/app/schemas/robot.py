from __future__ import annotations

from enum import Enum
from typing import Any, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


LINK_ORDER = ("trunk", "left_thigh", "left_shank", "right_thigh", "right_shank")


class StanceLeg(str, Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def other(self) -> "StanceLeg":
        return StanceLeg.RIGHT if self is StanceLeg.LEFT else StanceLeg.LEFT


class LinkSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    mass: float = Field(..., gt=0)
    length: float = Field(..., gt=0)
    # distance from the proximal joint to the link CoM along the link axis
    com_offset: float
    # about the link CoM, out-of-plane axis
    inertia_zz: float = Field(..., ge=0)

    @model_validator(mode="before")
    @classmethod
    def _uniform_rod_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        mass, length = data.get("mass"), data.get("length")
        if data.get("com_offset") is None and length is not None:
            data["com_offset"] = float(length) / 2.0
        if data.get("inertia_zz") is None and mass is not None and length is not None:
            data["inertia_zz"] = float(mass) * float(length) ** 2 / 12.0
        return data

    @model_validator(mode="after")
    def _offset_on_link(self) -> "LinkSpec":
        if not 0.0 <= self.com_offset <= self.length:
            raise ValueError(f"{self.name}: com_offset must lie in [0, length]")
        return self


class RobotModel(BaseModel):
    """Planar 5-link point-foot biped.

    Floating base on the trunk (base point = hip), hip joints q1/q3 on the trunk,
    knee joints q2/q4 on the thighs. Links are ordered as in LINK_ORDER.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    links: Tuple[LinkSpec, LinkSpec, LinkSpec, LinkSpec, LinkSpec]
    gravity: float = Field(9.81, gt=0)

    @field_validator("links")
    @classmethod
    def _link_order(cls, links: Tuple[LinkSpec, ...]) -> Tuple[LinkSpec, ...]:
        names = tuple(link.name for link in links)
        if names != LINK_ORDER:
            raise ValueError(f"links must be ordered {LINK_ORDER}, got {names}")
        return links

    @property
    def total_mass(self) -> float:
        return float(sum(link.mass for link in self.links))

    @property
    def trunk(self) -> LinkSpec:
        return self.links[0]


def default_robot() -> RobotModel:
    """Masses and lengths of the simulated planar biped; thin-rod CoM offsets and inertias."""
    return RobotModel(
        links=(
            LinkSpec(name="trunk", mass=38.0, length=0.63),
            LinkSpec(name="left_thigh", mass=0.3, length=0.4),
            LinkSpec(name="left_shank", mass=0.3, length=0.4),
            LinkSpec(name="right_thigh", mass=0.3, length=0.4),
            LinkSpec(name="right_shank", mass=0.3, length=0.4),
        ),
        gravity=9.81,
    )
