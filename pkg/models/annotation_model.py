import math
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .geometry_model import CameraIntrinsics, Cuboid3D

CameraPosition = Literal["front", "back"]


class Box2D(BaseModel):
    """Axis-aligned image box given by its center and size, in pixels."""

    model_config = ConfigDict(frozen=True)

    center_u: float
    center_v: float
    width: float
    height: float

    @model_validator(mode="after")
    def _check_box(self) -> "Box2D":
        values = (self.center_u, self.center_v, self.width, self.height)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("box values must be finite")
        if self.width < 0 or self.height < 0:
            raise ValueError("box width and height must be non-negative")
        return self

    @classmethod
    def from_corners(cls, u1: float, v1: float, u2: float, v2: float) -> "Box2D":
        return cls(
            center_u=(u1 + u2) / 2.0,
            center_v=(v1 + v2) / 2.0,
            width=u2 - u1,
            height=v2 - v1,
        )

    def corners(self) -> Tuple[float, float, float, float]:
        """(u_min, v_min, u_max, v_max)"""
        hw, hh = self.width / 2.0, self.height / 2.0
        return (self.center_u - hw, self.center_v - hh, self.center_u + hw, self.center_v + hh)

    @property
    def area(self) -> float:
        return self.width * self.height


class Detection2D(BaseModel):
    """Output of the simple 2D model: a box, objectness and per-class probabilities."""

    model_config = ConfigDict(frozen=True)

    box: Box2D
    objectness: float = Field(ge=0.0, le=1.0)
    class_probs: Dict[str, float]

    @field_validator("class_probs")
    @classmethod
    def _check_probs(cls, v: Dict[str, float]) -> Dict[str, float]:
        if not v:
            raise ValueError("class_probs must name at least one class")
        for name, p in v.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability of {name!r} outside [0, 1]")
        return v

    @property
    def category(self) -> str:
        # ties resolve to the lexicographically first class name
        return min(self.class_probs, key=lambda name: (-self.class_probs[name], name))

    @property
    def confidence(self) -> float:
        return self.objectness * self.class_probs[self.category]


class Annotation(BaseModel):
    """One labelled object. Semi-pseudo-labels carry a 2D box only."""

    model_config = ConfigDict(frozen=True)

    category: str
    box2d: Box2D
    cuboid: Optional[Cuboid3D] = None
    confidence: float = Field(default=1.0, ge=0.0, le=1.0)
    is_pseudo: bool = False

    @model_validator(mode="after")
    def _check_pseudo_flag(self) -> "Annotation":
        if self.is_pseudo and self.cuboid is not None:
            raise ValueError("semi-pseudo-labels cannot carry a cuboid")
        if not self.is_pseudo and self.cuboid is None:
            raise ValueError("3D annotations require a cuboid")
        return self


class Raster(BaseModel):
    """Row-major RGB image with intensities in [0, 1], shape (height, width, 3)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    width: int
    height: int
    values: np.ndarray

    @model_validator(mode="after")
    def _check_shape(self) -> "Raster":
        if self.values.shape != (self.height, self.width, 3):
            raise ValueError(
                f"raster values have shape {self.values.shape}, expected {(self.height, self.width, 3)}")
        return self

    @classmethod
    def blank(cls, width: int, height: int) -> "Raster":
        return cls(width=width, height=height, values=np.zeros((height, width, 3), dtype=np.float64))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and np.array_equal(self.values, other.values))


class Frame(BaseModel):
    """One camera image with its intrinsics and labels; the unit of dataset processing."""

    id: str
    camera: CameraPosition = "front"
    intrinsics: CameraIntrinsics
    raster: Optional[Raster] = None
    annotations: List[Annotation] = Field(default_factory=list)

    def with_annotations(self, annotations: List[Annotation]) -> "Frame":
        return self.model_copy(update={"annotations": list(annotations)})
