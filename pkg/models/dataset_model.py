from typing import Any, Dict, List, Mapping, Optional

from pydantic import BaseModel, Field, model_validator

from common import CURRENT_SCHEMA_VERSION

from .annotation_model import Annotation, CameraPosition, Detection2D
from .geometry_model import CameraIntrinsics, Dimensions3


class CategoryEntry(BaseModel):
    id: int
    name: str
    prior: Dimensions3


class ProvenanceEntry(BaseModel):
    operation: str
    parameters: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None


class DatasetManifest(BaseModel):
    schema_version: int = CURRENT_SCHEMA_VERSION
    frame_count: int = Field(default=0, ge=0)
    categories: List[CategoryEntry] = Field(default_factory=list)
    provenance: List[ProvenanceEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_categories(self) -> "DatasetManifest":
        if sorted(c.id for c in self.categories) != list(range(len(self.categories))):
            raise ValueError("category ids must be dense from 0")
        if len({c.name for c in self.categories}) != len(self.categories):
            raise ValueError("category names must be unique")
        return self

    @classmethod
    def from_priors(cls, priors: Mapping[str, Dimensions3]) -> "DatasetManifest":
        return cls(categories=[CategoryEntry(id=i, name=name, prior=priors[name])
                               for i, name in enumerate(sorted(priors))])

    def priors(self) -> Dict[str, Dimensions3]:
        return {c.name: c.prior for c in self.categories}

    def with_provenance(self, operation: str, parameters: Optional[Dict[str, Any]] = None,
                        seed: Optional[int] = None) -> "DatasetManifest":
        entry = ProvenanceEntry(operation=operation, parameters=dict(parameters or {}), seed=seed)
        return self.model_copy(update={"provenance": [*self.provenance, entry]})


class FrameRecord(BaseModel):
    """One line of frames.jsonl; the raster is a path relative to the dataset directory."""

    id: str
    camera: CameraPosition = "front"
    intrinsics: CameraIntrinsics
    raster: Optional[str] = None
    annotations: List[Annotation] = Field(default_factory=list)


class DetectionRecord(BaseModel):
    frame_id: str
    detections: List[Detection2D] = Field(default_factory=list)


class PredictionRecord(BaseModel):
    frame_id: str
    predictions: List[Annotation] = Field(default_factory=list)
