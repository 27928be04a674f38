"""
Top-view precision/recall heatmap around the ego vehicle.

Positions are (lateral x, longitudinal z) in ego coordinates: forward camera
coordinates are used as they are, backward camera coordinates are turned
half way round. A true positive counts towards recall in the cell of its
ground truth and towards precision in the cell of its prediction.
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from models.annotation_model import CameraPosition
from models.config_model import HeatmapConfig
from models.eval_model import HeatmapGrid

from .matching import match_by_distance


def to_ego(camera: CameraPosition, x: float, z: float) -> Tuple[float, float]:
    if camera == "back":
        return -x, -z
    return x, z


def cell_of(config: HeatmapConfig, x: float, z: float) -> Optional[Tuple[int, int]]:
    """(row, col) of a position, or None outside the grid."""
    col = math.floor((x + config.lateral_extent) / config.cell_lateral)
    row = math.floor((z - config.longitudinal_min) / config.cell_longitudinal)
    if 0 <= row < config.rows and 0 <= col < config.cols:
        return row, col
    return None


def blank_cells(config: HeatmapConfig) -> np.ndarray:
    """The single cell holding the ego origin; its counts are kept, its metrics left undefined."""
    blank = np.zeros((config.rows, config.cols), dtype=bool)
    origin = cell_of(config, 0.0, 0.0)
    if origin is not None:
        blank[origin] = True
    return blank


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.full(num.shape, np.nan)
    defined = den > 0
    out[defined] = num[defined] / den[defined]
    return out


def _mean_defined(values: np.ndarray, blank: np.ndarray) -> Optional[float]:
    defined = values[~blank & ~np.isnan(values)]
    return float(defined.mean()) if defined.size else None


def heatmap_eval(
    gts_per_frame: Sequence[np.ndarray],
    preds_per_frame: Sequence[np.ndarray],
    assoc_distance: float = 10.0,
    config: Optional[HeatmapConfig] = None,
) -> HeatmapGrid:
    """Each frame contributes (n, 2) arrays of ego (x, z) ground-truth and predicted positions."""
    if len(gts_per_frame) != len(preds_per_frame):
        raise ValueError("ground truth and predictions must cover the same frames")
    config = config or HeatmapConfig()
    shape = (config.rows, config.cols)
    tp_recall = np.zeros(shape, dtype=np.int64)
    tp_precision = np.zeros(shape, dtype=np.int64)
    fp = np.zeros(shape, dtype=np.int64)
    fn = np.zeros(shape, dtype=np.int64)
    overflow = {"tp_gt": 0, "tp_pred": 0, "fp": 0, "fn": 0}

    def add(counts: np.ndarray, key: str, x: float, z: float) -> None:
        cell = cell_of(config, x, z)
        if cell is None:
            overflow[key] += 1
        else:
            counts[cell] += 1

    for gts, preds in zip(gts_per_frame, preds_per_frame):
        gts = np.asarray(gts, dtype=np.float64).reshape(-1, 2)
        preds = np.asarray(preds, dtype=np.float64).reshape(-1, 2)
        result = match_by_distance(gts, preds, assoc_distance)
        for g, p in result.pairs:
            add(tp_recall, "tp_gt", *gts[g])
            add(tp_precision, "tp_pred", *preds[p])
        for g in result.unmatched_gt:
            add(fn, "fn", *gts[g])
        for p in result.unmatched_pred:
            add(fp, "fp", *preds[p])

    blank = blank_cells(config)
    precision = _ratio(tp_precision, tp_precision + fp)
    recall = _ratio(tp_recall, tp_recall + fn)
    precision[blank] = np.nan
    recall[blank] = np.nan
    return HeatmapGrid(
        config=config,
        tp_recall=tp_recall,
        tp_precision=tp_precision,
        fp=fp,
        fn=fn,
        precision=precision,
        recall=recall,
        blank=blank,
        total_precision=_mean_defined(precision, blank),
        total_recall=_mean_defined(recall, blank),
        overflow=overflow,
    )
