from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from typing_extensions import TypedDict

from .config_model import HeatmapConfig


class MatchResult(BaseModel):
    """Pairs are (gt index, pred index), sorted by gt index."""

    pairs: List[Tuple[int, int]] = Field(default_factory=list)
    unmatched_gt: List[int] = Field(default_factory=list)
    unmatched_pred: List[int] = Field(default_factory=list)


class PRPoint(BaseModel):
    """
    Counts at one confidence threshold. tp counts matched ground truths in
    scope and tp_pred matched predictions in scope; they differ only when
    ground truths and predictions are scoped separately (distance bands).
    """

    threshold: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    tp_pred: int


class PRCurve(BaseModel):
    # sorted by descending threshold
    points: List[PRPoint] = Field(default_factory=list)
    auc: float
    auc_undefined: bool = False
    n_gt: int = 0
    n_pred: int = 0

    def at(self, threshold: float) -> PRPoint:
        """Operating point: predictions with confidence >= threshold."""
        eligible = [p for p in self.points if p.threshold >= threshold]
        if eligible:
            return eligible[-1]
        return PRPoint(
            threshold=threshold,
            precision=1.0,
            recall=1.0 if self.n_gt == 0 else 0.0,
            tp=0, fp=0, fn=self.n_gt, tp_pred=0,
        )


class HeatmapGrid(BaseModel):
    """
    Top-view counts and metrics. Row r covers longitudinal
    [min + r*cell, min + (r+1)*cell); column c covers lateral
    [-extent + c*cell, -extent + (c+1)*cell). Undefined values are NaN.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: HeatmapConfig
    tp_recall: np.ndarray
    tp_precision: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    blank: np.ndarray
    total_precision: Optional[float] = None
    total_recall: Optional[float] = None
    overflow: Dict[str, int] = Field(default_factory=dict)


class MetricRow(TypedDict):
    category: str
    band: str
    space: str
    auc: float
    auc_undefined: bool
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    n_gt: int
    n_pred: int


class EvalReport(BaseModel):
    rows: List[MetricRow] = Field(default_factory=list)
    heatmap: HeatmapGrid
    frames: int = 0
    n_gt: int = 0
    n_pred: int = 0
    # prediction records whose frame id is not in the ground truth
    unknown_frames: List[str] = Field(default_factory=list)

    def row(self, category: str, band: str, space: str) -> MetricRow:
        for r in self.rows:
            if (r["category"], r["band"], r["space"]) == (category, band, space):
                return r
        raise KeyError(f"no metric row for ({category}, {band}, {space})")
