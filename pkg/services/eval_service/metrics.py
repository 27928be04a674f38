"""
Precision/recall sweeps.

Matching is done once per frame for every distinct confidence of that frame
(the predictions at or above it); the dataset curve at any threshold is then
the sum of each frame's counts at its nearest step, so no frame is matched
more often than it has distinct confidences.
"""

from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from models.eval_model import PRCurve, PRPoint

from .matching import Matcher, match_by_similarity


class FrameSteps(NamedTuple):
    # distinct confidences of the frame, descending
    thresholds: np.ndarray
    # pairs[k]: (gt, pred) pairs using predictions with confidence >= thresholds[k]
    pairs: List[List[Tuple[int, int]]]
    confidences: np.ndarray
    n_gt: int


def match_steps(gts: Sequence, preds: Sequence[Tuple[object, float]], matcher: Matcher) -> FrameSteps:
    items = [item for item, _ in preds]
    confidences = np.array([c for _, c in preds], dtype=np.float64)
    if confidences.size and (np.any(confidences < 0.0) or np.any(confidences > 1.0)):
        raise ValueError("prediction confidences must lie in [0, 1]")
    thresholds = np.unique(confidences)[::-1]
    similarity = matcher.similarity(gts, items)
    admissible = similarity >= matcher.threshold

    steps: List[List[Tuple[int, int]]] = []
    current: List[Tuple[int, int]] = []
    previous = np.zeros(len(items), dtype=bool)
    for t in thresholds:
        active = confidences >= t
        # newcomers without an admissible gt cannot change the matching
        if admissible[:, active & ~previous].any():
            cols = np.nonzero(active)[0]
            result = match_by_similarity(similarity[:, cols], matcher.threshold)
            current = [(g, int(cols[j])) for g, j in result.pairs]
        steps.append(list(current))
        previous = active
    return FrameSteps(thresholds=thresholds, pairs=steps, confidences=confidences, n_gt=len(gts))


def curve_from_steps(
    frames: Sequence[FrameSteps],
    gt_masks: Optional[Sequence[np.ndarray]] = None,
    pred_masks: Optional[Sequence[np.ndarray]] = None,
) -> PRCurve:
    """
    Build the dataset curve. Masks restrict which ground truths count towards
    recall and which predictions count towards precision; matching itself
    always sees every object of the frame.
    """
    gms = [np.ones(f.n_gt, dtype=bool) if gt_masks is None else np.asarray(gt_masks[i], dtype=bool)
           for i, f in enumerate(frames)]
    pms = [np.ones(f.confidences.size, dtype=bool) if pred_masks is None else np.asarray(pred_masks[i], dtype=bool)
           for i, f in enumerate(frames)]
    n_gt = int(sum(m.sum() for m in gms))
    n_pred = int(sum(m.sum() for m in pms))

    all_thresholds = [f.thresholds for f in frames if f.thresholds.size]
    if not all_thresholds:
        return _finish([], n_gt, n_pred)
    sweep = np.unique(np.concatenate(all_thresholds))[::-1]

    tp = np.zeros(sweep.size, dtype=np.int64)
    tp_pred = np.zeros(sweep.size, dtype=np.int64)
    scoped_preds = np.zeros(sweep.size, dtype=np.int64)
    for f, gm, pm in zip(frames, gms, pms):
        if not f.thresholds.size:
            continue
        step_tp = np.array([sum(int(gm[g]) for g, _ in pairs) for pairs in f.pairs], dtype=np.int64)
        step_tp_pred = np.array([sum(int(pm[q]) for _, q in pairs) for pairs in f.pairs], dtype=np.int64)
        # number of frame steps at or above each sweep threshold
        reached = np.searchsorted(-f.thresholds, -sweep, side="right")
        has = reached > 0
        tp[has] += step_tp[reached[has] - 1]
        tp_pred[has] += step_tp_pred[reached[has] - 1]
        scoped = np.sort(f.confidences[pm])[::-1]
        scoped_preds += np.searchsorted(-scoped, -sweep, side="right")

    points = []
    for k, t in enumerate(sweep):
        fp = int(scoped_preds[k] - tp_pred[k])
        points.append(PRPoint(
            threshold=float(t),
            precision=float(tp_pred[k] / scoped_preds[k]) if scoped_preds[k] else 1.0,
            recall=float(tp[k] / n_gt) if n_gt else 1.0,
            tp=int(tp[k]),
            fp=fp,
            fn=int(n_gt - tp[k]),
            tp_pred=int(tp_pred[k]),
        ))
    return _finish(points, n_gt, n_pred)


def _finish(points: List[PRPoint], n_gt: int, n_pred: int) -> PRCurve:
    if n_gt == 0 and n_pred == 0:
        return PRCurve(points=points, auc=1.0, auc_undefined=True, n_gt=0, n_pred=0)
    auc = 0.0
    previous_recall = 0.0
    for p in points:
        auc += p.precision * (p.recall - previous_recall)
        previous_recall = p.recall
    return PRCurve(points=points, auc=auc, n_gt=n_gt, n_pred=n_pred)


def pr_curve_and_auc(
    gts_per_frame: Sequence[Sequence],
    preds_per_frame: Sequence[Sequence[Tuple[object, float]]],
    matcher: Matcher,
    gt_masks: Optional[Sequence[np.ndarray]] = None,
    pred_masks: Optional[Sequence[np.ndarray]] = None,
) -> PRCurve:
    if len(gts_per_frame) != len(preds_per_frame):
        raise ValueError("ground truth and predictions must cover the same frames")
    steps = [match_steps(g, p, matcher) for g, p in zip(gts_per_frame, preds_per_frame)]
    return curve_from_steps(steps, gt_masks, pred_masks)
