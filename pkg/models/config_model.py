from typing import Dict, List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from common import DEFAULT_SEED

from .geometry_model import CameraIntrinsics, Dimensions3


class ScaleBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    lower: float = 0.5
    upper: float = 2.0

    @model_validator(mode="after")
    def _check_order(self) -> "ScaleBounds":
        if not 0 < self.lower <= self.upper:
            raise ValueError("scale bounds must satisfy 0 < lower <= upper")
        return self

    @property
    def mode(self) -> Literal["zoom_in", "zoom_out", "identity", "mixed"]:
        if self.lower == self.upper == 1.0:
            return "identity"
        if self.upper <= 1.0:
            return "zoom_out"
        if self.lower >= 1.0:
            return "zoom_in"
        return "mixed"


class ZoomShiftParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    scale: float = Field(default=1.0, gt=0.0)
    shift_u: float = 0.0
    shift_v: float = 0.0


class AugmentConfig(BaseModel):
    scale_bounds: ScaleBounds = ScaleBounds()
    # shift range as a fraction of the image size, symmetric around zero
    shift_fraction: float = Field(default=0.1, ge=0.0)
    visibility_threshold: float = Field(default=0.25, ge=0.0, le=1.0)


DEFAULT_CATEGORIES = ("car", "large_vehicle", "pedestrian")


class SplConfig(BaseModel):
    iou_threshold: float = Field(default=0.5, gt=0.0, le=1.0)
    # simple-model class -> complex-model class
    class_map: Dict[str, str] = Field(default_factory=lambda: {c: c for c in DEFAULT_CATEGORIES})


class EvalConfig(BaseModel):
    iou_threshold: float = Field(default=0.5, gt=0.0, le=1.0)
    operating_threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    assoc_distance: float = Field(default=10.0, gt=0.0)
    class_agnostic: bool = False
    bands: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(0.0, 120.0), (120.0, 150.0), (150.0, 200.0)])

    @field_validator("bands")
    @classmethod
    def _check_bands(cls, v: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        for lo, hi in v:
            if not 0 <= lo < hi:
                raise ValueError(f"invalid distance band ({lo}, {hi})")
        return v


class HeatmapConfig(BaseModel):
    cell_lateral: float = Field(default=4.0, gt=0.0)
    cell_longitudinal: float = Field(default=10.0, gt=0.0)
    longitudinal_min: float = -100.0
    longitudinal_max: float = 200.0
    lateral_extent: float = Field(default=20.0, gt=0.0)

    @model_validator(mode="after")
    def _check_grid(self) -> "HeatmapConfig":
        if self.longitudinal_min >= self.longitudinal_max:
            raise ValueError("longitudinal_min must be below longitudinal_max")
        rows = (self.longitudinal_max - self.longitudinal_min) / self.cell_longitudinal
        cols = 2 * self.lateral_extent / self.cell_lateral
        if abs(rows - round(rows)) > 1e-9 or abs(cols - round(cols)) > 1e-9:
            raise ValueError("heatmap extents must be whole multiples of the cell size")
        return self

    @property
    def rows(self) -> int:
        return int(round((self.longitudinal_max - self.longitudinal_min) / self.cell_longitudinal))

    @property
    def cols(self) -> int:
        return int(round(2 * self.lateral_extent / self.cell_lateral))


class CategorySpec(BaseModel):
    name: str
    weight: float = Field(gt=0.0)
    prior: Dimensions3
    # relative standard deviation of each dimension around the prior
    jitter: float = Field(default=0.1, ge=0.0, lt=0.5)
    annotated_3d: bool = True


def _default_categories() -> List[CategorySpec]:
    return [
        CategorySpec(name="car", weight=0.7, prior=Dimensions3(width=1.8, height=1.5, length=4.5)),
        CategorySpec(name="large_vehicle", weight=0.2, prior=Dimensions3(width=2.5, height=3.2, length=10.0)),
        CategorySpec(name="pedestrian", weight=0.1, prior=Dimensions3(width=0.6, height=1.7, length=0.6)),
    ]


def _default_intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(fx=1000.0, fy=1000.0, cx=960.0, cy=540.0, width=1920, height=1080)


class SceneConfig(BaseModel):
    object_count: Tuple[int, int] = (5, 15)
    longitudinal_range: Tuple[float, float] = (5.0, 200.0)
    longitudinal_distribution: Literal["uniform", "exponential"] = "uniform"
    # decay length of the truncated exponential placement, meters
    exponential_scale: float = Field(default=60.0, gt=0.0)
    lateral_range: Tuple[float, float] = (-15.0, 15.0)
    camera_height: float = Field(default=1.5, gt=0.0)
    categories: List[CategorySpec] = Field(default_factory=_default_categories)
    yaw_distribution: Literal["uniform", "aligned"] = "aligned"
    yaw_std_deg: float = Field(default=10.0, ge=0.0)
    # extra top-view gap between footprint circles, meters
    min_separation: float = Field(default=1.0, ge=0.0)
    max_box_iou: float = Field(default=0.25, ge=0.0, le=1.0)
    # objects closer than this are outside the camera's field of view
    min_visible_range: float = Field(default=0.0, ge=0.0)
    max_attempts: int = Field(default=1000, gt=0)
    intrinsics: CameraIntrinsics = Field(default_factory=_default_intrinsics)
    backward_frames: bool = False
    backward_longitudinal_range: Tuple[float, float] = (5.0, 100.0)

    @model_validator(mode="after")
    def _check_scene(self) -> "SceneConfig":
        lo, hi = self.object_count
        if not 0 <= lo <= hi:
            raise ValueError("object_count must satisfy 0 <= min <= max")
        for name, (a, b) in (("longitudinal_range", self.longitudinal_range),
                             ("backward_longitudinal_range", self.backward_longitudinal_range)):
            if not 0 < a < b:
                raise ValueError(f"{name} must be positive and ordered")
        if not self.lateral_range[0] < self.lateral_range[1]:
            raise ValueError("lateral_range must be ordered")
        if not self.categories:
            raise ValueError("at least one category is required")
        if abs(sum(c.weight for c in self.categories) - 1.0) > 1e-9:
            raise ValueError("category weights must sum to 1")
        return self

    def priors(self) -> Dict[str, Dimensions3]:
        return {c.name: c.prior for c in self.categories}


class ErrorModel(BaseModel):
    box_noise_px: float = Field(default=2.0, ge=0.0)
    # piecewise-linear (distance m, dropout probability) knots
    dropout_knots: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(0.0, 0.0), (150.0, 0.05), (200.0, 0.3)])
    # longitudinal std = coef * distance
    longitudinal_noise_coef: float = Field(default=0.02, ge=0.0)
    lateral_noise_std: float = Field(default=0.2, ge=0.0)
    orientation_noise_deg: float = Field(default=5.0, ge=0.0)
    confidence_noise: float = Field(default=0.05, ge=0.0)

    @field_validator("dropout_knots")
    @classmethod
    def _check_knots(cls, v: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        if not v:
            raise ValueError("at least one dropout knot is required")
        distances = [d for d, _ in v]
        if any(b <= a for a, b in zip(distances, distances[1:])):
            raise ValueError("dropout knot distances must be strictly increasing")
        if any(not 0.0 <= p <= 1.0 for _, p in v):
            raise ValueError("dropout probabilities must lie in [0, 1]")
        return v

    @classmethod
    def noiseless(cls) -> "ErrorModel":
        return cls(box_noise_px=0.0, dropout_knots=[(0.0, 0.0)], longitudinal_noise_coef=0.0,
                   lateral_noise_std=0.0, orientation_noise_deg=0.0, confidence_noise=0.0)

    def dropout(self, distance: float) -> float:
        xs = [d for d, _ in self.dropout_knots]
        ps = [p for _, p in self.dropout_knots]
        return float(np.interp(distance, xs, ps))


class DatagenConfig(BaseModel):
    scene: SceneConfig = SceneConfig()
    error_model: ErrorModel = ErrorModel()
    annotation_cutoff: float = Field(default=120.0, gt=0.0)


class RunConfig(BaseModel):
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    workers: int = Field(default=1, ge=1)


class PipelineConfig(BaseModel):
    """Every tunable of the toolkit; defaults are the published hyperparameters."""

    augment: AugmentConfig = AugmentConfig()
    spl: SplConfig = SplConfig()
    eval: EvalConfig = EvalConfig()
    heatmap: HeatmapConfig = HeatmapConfig()
    datagen: DatagenConfig = DatagenConfig()
    run: RunConfig = RunConfig()

