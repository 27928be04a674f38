"""
Semi-pseudo-label fusion.

2D detections of the simple model are merged into 3D-annotated frames.
Detections overlapping each other (IoU >= threshold, transitively) are taken
as one object, represented by the most confident of them. A representative
becomes a semi-pseudo-label unless it overlaps (IoU >= threshold) the 2D
projection of a 3D ground-truth cuboid or an already present 2D box; the
rest of its group is filtered with it.
"""

import logging
from typing import List, Mapping, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.sparse.csgraph import connected_components

from models.annotation_model import Annotation, Box2D, Detection2D, Frame
from models.errors import CornerBehindCamera, UnmappedCategory
from utils.geometry import project_cuboid_to_box2d
from utils.work_queue import map_frames

logger = logging.getLogger(__name__)


class FusionSummary(BaseModel):
    frames: int = 0
    detections: int = 0
    added: int = 0
    filtered: int = 0


def iou_2d(a: Box2D, b: Box2D) -> float:
    if a == b:
        return 1.0 if a.area > 0.0 else 0.0
    au1, av1, au2, av2 = a.corners()
    bu1, bv1, bu2, bv2 = b.corners()
    iw = max(0.0, min(au2, bu2) - max(au1, bu1))
    ih = max(0.0, min(av2, bv2) - max(av1, bv1))
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def _reference_boxes(frame: Frame) -> List[Box2D]:
    boxes = []
    for annotation in frame.annotations:
        if annotation.cuboid is not None:
            try:
                boxes.append(project_cuboid_to_box2d(frame.intrinsics, annotation.cuboid))
            except CornerBehindCamera:
                logger.debug("frame %s: cuboid straddles the image plane, using its 2D box only", frame.id)
        boxes.append(annotation.box2d)
    return boxes


def _sort_key(detection: Detection2D) -> Tuple:
    b = detection.box
    return (-detection.confidence, detection.category, b.center_u, b.center_v, b.width, b.height)


def _duplicate_groups(ranked: Sequence[Detection2D], iou_threshold: float) -> np.ndarray:
    """Connected-component label of every detection under the IoU >= threshold relation."""
    n = len(ranked)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    overlap = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            overlap[i, j] = iou_2d(ranked[i].box, ranked[j].box) >= iou_threshold
    _, labels = connected_components(overlap, directed=False)
    return labels


def fuse_frame_with_counts(
    frame: Frame,
    detections: Sequence[Detection2D],
    iou_threshold: float,
    class_map: Mapping[str, str],
) -> Tuple[Frame, int, int]:
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    ranked = sorted(detections, key=_sort_key)
    for detection in ranked:
        if detection.category not in class_map:
            raise UnmappedCategory(
                f"frame {frame.id}: detection class {detection.category!r} has no complex-model category")
    references = _reference_boxes(frame)
    added: List[Annotation] = []
    filtered = 0
    seen = set()
    for detection, group in zip(ranked, _duplicate_groups(ranked, iou_threshold)):
        if group in seen:
            filtered += 1
            continue
        seen.add(group)
        best = max((iou_2d(detection.box, ref) for ref in references), default=0.0)
        if best >= iou_threshold:
            filtered += 1
            continue
        added.append(Annotation(
            category=class_map[detection.category],
            box2d=detection.box,
            cuboid=None,
            confidence=detection.confidence,
            is_pseudo=True,
        ))
    return frame.with_annotations(list(frame.annotations) + added), len(added), filtered


def fuse_frame(
    frame: Frame,
    detections: Sequence[Detection2D],
    iou_threshold: float,
    class_map: Mapping[str, str],
) -> Frame:
    fused, _, _ = fuse_frame_with_counts(frame, detections, iou_threshold, class_map)
    return fused


async def fuse_dataset(
    frames: Sequence[Frame],
    detections: Mapping[str, Sequence[Detection2D]],
    iou_threshold: float,
    class_map: Mapping[str, str],
    workers: int = 1,
) -> Tuple[List[Frame], FusionSummary]:
    """Fuse every frame; frames without an entry in detections pass through unchanged."""

    def run(frame: Frame) -> Tuple[Frame, int, int]:
        return fuse_frame_with_counts(frame, detections.get(frame.id, ()), iou_threshold, class_map)

    results = await map_frames(run, frames, workers)
    summary = FusionSummary(frames=len(frames))
    fused: List[Frame] = []
    for frame, added, filtered in results:
        fused.append(frame)
        summary.added += added
        summary.filtered += filtered
    summary.detections = summary.added + summary.filtered
    logger.info("fused %d frames: %d detections, %d added as semi-pseudo-labels, %d filtered",
                summary.frames, summary.detections, summary.added, summary.filtered)
    return fused, summary
