import logging
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from models.annotation_model import Annotation, Frame
from models.config_model import EvalConfig, HeatmapConfig
from models.eval_model import EvalReport, MetricRow, PRCurve
from utils.work_queue import map_frames

from .bev import iou_matrix_bev
from .heatmap import heatmap_eval, to_ego
from .matching import Matcher, iou_matrix_2d
from .metrics import FrameSteps, curve_from_steps, match_steps

logger = logging.getLogger(__name__)

ALL = "all"
SPACES = ("2d", "bev")


def band_label(band: Tuple[float, float]) -> str:
    lo, hi = band
    return f"{lo:g}-{hi:g}"


def _depth(a: Annotation) -> Optional[float]:
    return a.cuboid.center.z if a.cuboid is not None else None


def _in_band(a: Annotation, band: Optional[Tuple[float, float]]) -> bool:
    if band is None:
        return True
    z = _depth(a)
    return z is not None and band[0] <= z < band[1]


def _space_items(annotations: Sequence[Annotation], space: str) -> List[Annotation]:
    if space == "bev":
        return [a for a in annotations if a.cuboid is not None]
    return list(annotations)


def _matcher(space: str, iou_threshold: float) -> Matcher:
    if space == "bev":
        return Matcher(lambda g, p: iou_matrix_bev([a.cuboid for a in g], [a.cuboid for a in p]), iou_threshold)
    return Matcher(lambda g, p: iou_matrix_2d([a.box2d for a in g], [a.box2d for a in p]), iou_threshold)


def _row(category: str, band: str, space: str, curve: PRCurve, operating_threshold: float) -> MetricRow:
    point = curve.at(operating_threshold)
    return MetricRow(
        category=category, band=band, space=space,
        auc=curve.auc, auc_undefined=curve.auc_undefined,
        precision=point.precision, recall=point.recall,
        tp=point.tp, fp=point.fp, fn=point.fn,
        n_gt=curve.n_gt, n_pred=curve.n_pred,
    )


async def evaluate(
    gt_frames: Sequence[Frame],
    predictions: Mapping[str, Sequence[Annotation]],
    config: Optional[EvalConfig] = None,
    heatmap_config: Optional[HeatmapConfig] = None,
    workers: int = 1,
) -> EvalReport:
    """
    Metric rows for every (category, band, space) plus the class-agnostic
    heatmap at the operating threshold. Frames without predictions count as
    empty detector output.
    """
    config = config or EvalConfig()
    known = {f.id for f in gt_frames}
    unknown = sorted(set(predictions) - known)
    if unknown:
        logger.warning("%d prediction records reference unknown frames, ignored (first: %s)",
                       len(unknown), unknown[0])
    preds_by_frame = [list(predictions.get(f.id, ())) for f in gt_frames]

    categories = sorted({a.category for f in gt_frames for a in f.annotations}
                        | {a.category for ps in preds_by_frame for a in ps})
    scopes = [ALL] + ([] if config.class_agnostic else categories)
    bands: List[Tuple[str, Optional[Tuple[float, float]]]] = [(ALL, None)]
    bands += [(band_label(b), tuple(b)) for b in config.bands]

    rows: List[MetricRow] = []
    for space in SPACES:
        matcher = _matcher(space, config.iou_threshold)
        for scope in scopes:
            gts = [[a for a in _space_items(f.annotations, space) if scope == ALL or a.category == scope]
                   for f in gt_frames]
            preds = [[a for a in _space_items(ps, space) if scope == ALL or a.category == scope]
                     for ps in preds_by_frame]

            def steps_for(i: int) -> FrameSteps:
                return match_steps(gts[i], [(a, a.confidence) for a in preds[i]], matcher)

            steps = await map_frames(steps_for, list(range(len(gt_frames))), workers)
            for label, band in bands:
                gt_masks = [np.array([_in_band(a, band) for a in g], dtype=bool) for g in gts]
                pred_masks = [np.array([_in_band(a, band) for a in p], dtype=bool) for p in preds]
                curve = curve_from_steps(steps, gt_masks, pred_masks)
                rows.append(_row(scope, label, space, curve, config.operating_threshold))

    heatmap = heatmap_eval(
        [_ego_positions(f, f.annotations) for f in gt_frames],
        [_ego_positions(f, [a for a in ps if a.confidence >= config.operating_threshold])
         for f, ps in zip(gt_frames, preds_by_frame)],
        assoc_distance=config.assoc_distance,
        config=heatmap_config,
    )
    report = EvalReport(
        rows=rows,
        heatmap=heatmap,
        frames=len(gt_frames),
        n_gt=sum(len(f.annotations) for f in gt_frames),
        n_pred=sum(len(ps) for ps in preds_by_frame),
        unknown_frames=unknown,
    )
    summary = report.row(ALL, ALL, "2d"), report.row(ALL, ALL, "bev")
    logger.info("evaluated %d frames: 2D AUC %.4f, BEV AUC %.4f, heatmap precision %s recall %s",
                report.frames, summary[0]["auc"], summary[1]["auc"],
                _fmt(heatmap.total_precision), _fmt(heatmap.total_recall))
    return report


def _ego_positions(frame: Frame, annotations: Sequence[Annotation]) -> np.ndarray:
    points = [to_ego(frame.camera, a.cuboid.center.x, a.cuboid.center.z)
              for a in annotations if a.cuboid is not None]
    return np.array(points, dtype=np.float64).reshape(-1, 2)


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"
