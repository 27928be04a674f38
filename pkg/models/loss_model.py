from typing import Dict, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .annotation_model import Box2D
from .errors import UnknownCategory
from .geometry_model import Dimensions3, Pixel, Quaternion


class PredictionEncoding(BaseModel):
    """What the 3D detector regresses for one object."""

    model_config = ConfigDict(frozen=True)

    box2d: Box2D
    objectness: float = Field(ge=0.0, le=1.0)
    class_probs: Dict[str, float]
    # projection of the cuboid center; with depth it fixes the 3D center
    center_proj: Pixel
    depth: float
    # log-ratios to the category prior: dims = prior * exp(residual)
    dim_residuals: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation_apparent: Quaternion = Quaternion()


class CategoryPriors(BaseModel):
    """Precomputed per-category mean dimensions."""

    priors: Dict[str, Dimensions3]

    def get(self, category: str) -> Dimensions3:
        try:
            return self.priors[category]
        except KeyError:
            raise UnknownCategory(f"no dimension prior for category {category!r}") from None


class Loss2DTerms(BaseModel):
    objectness: float = 0.0
    classification: float = 0.0
    box: float = 0.0

    @property
    def total(self) -> float:
        return self.objectness + self.classification + self.box


class Loss3DTerms(BaseModel):
    center: float = 0.0
    dimensions: float = 0.0
    orientation: float = 0.0

    @property
    def total(self) -> float:
        return self.center + self.dimensions + self.orientation


class LossBreakdown(BaseModel):
    loss_2d: float
    loss_3d: float
    total: float
    objectness: float
    classification: float
    box: float
    center: float
    dimensions: float
    orientation: float
