"""
Geometry value types.

Camera frame convention: x right, y down, z forward (meters). Quaternions are
Hamilton, stored (w, x, y, z), and rotate camera-frame vectors.
"""

import math
from typing import Tuple

from pydantic import BaseModel, ConfigDict, field_validator, model_validator


class CameraIntrinsics(BaseModel):
    """Pinhole camera matrix plus image size, all in pixels."""

    model_config = ConfigDict(frozen=True)

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    @model_validator(mode="after")
    def _check_positive(self) -> "CameraIntrinsics":
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        return self

    @property
    def image_center(self) -> Tuple[float, float]:
        return self.width / 2.0, self.height / 2.0


class Quaternion(BaseModel):
    model_config = ConfigDict(frozen=True)

    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(w=1.0, x=0.0, y=0.0, z=0.0)

    @classmethod
    def from_axis_angle(cls, axis: Tuple[float, float, float], angle: float) -> "Quaternion":
        ax, ay, az = axis
        n = math.sqrt(ax * ax + ay * ay + az * az)
        if n == 0.0:
            return cls.identity()
        s = math.sin(angle / 2.0) / n
        return cls(w=math.cos(angle / 2.0), x=ax * s, y=ay * s, z=az * s)

    @classmethod
    def from_yaw(cls, yaw: float) -> "Quaternion":
        """Rotation about the camera y axis (heading on the ground plane)."""
        return cls.from_axis_angle((0.0, 1.0, 0.0), yaw)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.w, self.x, self.y, self.z

    def norm(self) -> float:
        return math.sqrt(self.w ** 2 + self.x ** 2 + self.y ** 2 + self.z ** 2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n == 0.0:
            raise ValueError("zero quaternion has no rotation")
        return Quaternion(w=self.w / n, x=self.x / n, y=self.y / n, z=self.z / n)


class Point3(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    z: float

    @field_validator("x", "y", "z")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("point components must be finite")
        return v

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.x, self.y, self.z


class Dimensions3(BaseModel):
    """Object size in meters: width (x), height (y), length (z) in the object frame."""

    model_config = ConfigDict(frozen=True)

    width: float
    height: float
    length: float

    @model_validator(mode="after")
    def _check_positive(self) -> "Dimensions3":
        if min(self.width, self.height, self.length) <= 0:
            raise ValueError("dimensions must be strictly positive")
        return self

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.width, self.height, self.length


class Cuboid3D(BaseModel):
    """Center, size and egocentric orientation of a 3D box in the camera frame."""

    model_config = ConfigDict(frozen=True)

    center: Point3
    dims: Dimensions3
    orientation: Quaternion = Quaternion()


class Pixel(BaseModel):
    model_config = ConfigDict(frozen=True)

    u: float
    v: float

    @field_validator("u", "v")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("pixel coordinates must be finite")
        return v

    def as_tuple(self) -> Tuple[float, float]:
        return self.u, self.v
