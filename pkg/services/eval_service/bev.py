"""Bird's-eye-view footprints and their overlap."""

import math
from typing import Sequence

import numpy as np

from models.eval_model import MatchResult
from models.geometry_model import Cuboid3D
from utils.geometry import yaw_of
from utils.polygon import convex_iou, rectangle

from .matching import match_by_similarity


def footprint(c: Cuboid3D) -> np.ndarray:
    """Top-view rectangle on the x-z plane, width across and length along the heading."""
    return rectangle(c.center.x, c.center.z, c.dims.width, c.dims.length, yaw_of(c.orientation))


def bev_iou(a: Cuboid3D, b: Cuboid3D) -> float:
    if a == b:
        return 1.0
    return convex_iou(footprint(a), footprint(b))


def iou_matrix_bev(gts: Sequence[Cuboid3D], preds: Sequence[Cuboid3D]) -> np.ndarray:
    out = np.zeros((len(gts), len(preds)))
    if not gts or not preds:
        return out
    radius = lambda c: 0.5 * math.hypot(c.dims.width, c.dims.length)
    g_xy = np.array([(c.center.x, c.center.z) for c in gts])
    p_xy = np.array([(c.center.x, c.center.z) for c in preds])
    g_r = np.array([radius(c) for c in gts])
    p_r = np.array([radius(c) for c in preds])
    distance = np.linalg.norm(g_xy[:, None, :] - p_xy[None, :, :], axis=2)
    # footprints whose bounding circles are apart cannot overlap
    for i, j in zip(*np.nonzero(distance < g_r[:, None] + p_r[None, :])):
        out[i, j] = bev_iou(gts[i], preds[j])
    return out


def match_bev(gts: Sequence[Cuboid3D], preds: Sequence[Cuboid3D], iou_threshold: float = 0.5) -> MatchResult:
    return match_by_similarity(iou_matrix_bev(gts, preds), iou_threshold)
