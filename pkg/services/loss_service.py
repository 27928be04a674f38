"""
Masked multitask loss: 2D detection terms for every matched pair, and the
disentangled 3D corner loss only for pairs whose target is not a
semi-pseudo-label.

3D groups and the hybrid cuboid each one builds (other groups at ground truth):
- center:      backproject(center_proj, depth), GT dims, GT egocentric orientation
- dimensions:  GT center, prior * exp(dim_residuals), GT egocentric orientation
- orientation: GT center, GT dims, egocentric_from_apparent(orientation_apparent, GT center)
Each group loss is the mean over the 8 corners of the squared distance to the
ground-truth corners.
"""

import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from models.annotation_model import Annotation, Box2D
from models.errors import DegenerateBox, NonDifferentiablePoint, Spl3dError, UnknownCategory
from models.geometry_model import CameraIntrinsics, Cuboid3D, Dimensions3, Pixel, Quaternion
from models.loss_model import (
    CategoryPriors,
    Loss2DTerms,
    Loss3DTerms,
    LossBreakdown,
    PredictionEncoding,
)
from utils.geometry import (
    apparent_from_egocentric,
    backproject,
    corners_array,
    egocentric_from_apparent,
    project,
)

_LOG_EPS = 1e-12


# ========== encoding ==========

def decode_cuboid(pred: PredictionEncoding, k: CameraIntrinsics, priors: CategoryPriors, category: str) -> Cuboid3D:
    prior = priors.get(category)
    center = backproject(k, pred.center_proj, pred.depth)
    return Cuboid3D(
        center=center,
        dims=_decode_dims(prior, pred.dim_residuals),
        orientation=egocentric_from_apparent(pred.orientation_apparent.normalized(), center),
    )


def encode_cuboid(
    cuboid: Cuboid3D, k: CameraIntrinsics, priors: CategoryPriors, category: str,
) -> Tuple[Pixel, float, Tuple[float, float, float], Quaternion]:
    """(center_proj, depth, dim_residuals, orientation_apparent) of a cuboid."""
    prior = priors.get(category)
    residuals = tuple(math.log(d / p) for d, p in zip(cuboid.dims.as_tuple(), prior.as_tuple()))
    return (
        project(k, cuboid.center),
        cuboid.center.z,
        residuals,
        apparent_from_egocentric(cuboid.orientation, cuboid.center),
    )


def encode_target(
    target: Annotation, k: CameraIntrinsics, priors: CategoryPriors, class_names: Sequence[str],
) -> PredictionEncoding:
    """The prediction that reproduces target exactly (3D fields neutral for pseudo targets)."""
    if target.category not in class_names:
        raise UnknownCategory(f"category {target.category!r} is not among the predicted classes")
    probs = {name: 1.0 if name == target.category else 0.0 for name in class_names}
    if target.cuboid is None:
        return PredictionEncoding(
            box2d=target.box2d, objectness=1.0, class_probs=probs,
            center_proj=Pixel(u=target.box2d.center_u, v=target.box2d.center_v), depth=1.0,
        )
    center_proj, depth, residuals, q_app = encode_cuboid(target.cuboid, k, priors, target.category)
    return PredictionEncoding(
        box2d=target.box2d, objectness=1.0, class_probs=probs, center_proj=center_proj,
        depth=depth, dim_residuals=residuals, orientation_apparent=q_app,
    )


def _decode_dims(prior: Dimensions3, residuals: Tuple[float, float, float]) -> Dimensions3:
    w, h, l = (p * math.exp(r) for p, r in zip(prior.as_tuple(), residuals))
    return Dimensions3(width=w, height=h, length=l)


# ========== 2D ==========

def _bce(p: float, target: float) -> float:
    if target >= 1.0:
        return -math.log(max(p, _LOG_EPS))
    return -math.log(max(1.0 - p, _LOG_EPS))


def _log_size(box: Box2D, what: str) -> Tuple[float, float]:
    if box.width <= 0.0 or box.height <= 0.0:
        raise DegenerateBox(f"{what} box has zero width or height")
    return math.log(box.width), math.log(box.height)


def loss_2d(pred: PredictionEncoding, target: Annotation) -> Loss2DTerms:
    """Cross-entropy on objectness and classes, squared error on center and log-size."""
    tw, th = _log_size(target.box2d, "target")
    pw, ph = _log_size(pred.box2d, "predicted")
    if target.category not in pred.class_probs:
        raise UnknownCategory(f"category {target.category!r} is not among the predicted classes")
    classification = 0.0
    for name in sorted(pred.class_probs):
        classification += _bce(pred.class_probs[name], 1.0 if name == target.category else 0.0)
    du = pred.box2d.center_u - target.box2d.center_u
    dv = pred.box2d.center_v - target.box2d.center_v
    box = du * du + dv * dv + (pw - tw) ** 2 + (ph - th) ** 2
    return Loss2DTerms(objectness=_bce(pred.objectness, 1.0), classification=classification, box=box)


# ========== 3D ==========

def _corner_mse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(np.sum((a - b) ** 2, axis=1)))


def loss_3d_disentangled(
    pred: PredictionEncoding,
    target_cuboid: Cuboid3D,
    k: CameraIntrinsics,
    priors: CategoryPriors,
    category: str,
) -> Loss3DTerms:
    prior = priors.get(category)
    target = corners_array(target_cuboid)

    center_hybrid = Cuboid3D(
        center=backproject(k, pred.center_proj, pred.depth),
        dims=target_cuboid.dims,
        orientation=target_cuboid.orientation,
    )
    dims_hybrid = Cuboid3D(
        center=target_cuboid.center,
        dims=_decode_dims(prior, pred.dim_residuals),
        orientation=target_cuboid.orientation,
    )
    orientation_hybrid = Cuboid3D(
        center=target_cuboid.center,
        dims=target_cuboid.dims,
        orientation=egocentric_from_apparent(pred.orientation_apparent.normalized(), target_cuboid.center),
    )
    return Loss3DTerms(
        center=_corner_mse(corners_array(center_hybrid), target),
        dimensions=_corner_mse(corners_array(dims_hybrid), target),
        orientation=_corner_mse(corners_array(orientation_hybrid), target),
    )


def _check_matching(matching: Sequence[Tuple[int, int]], n_preds: int, n_targets: int) -> None:
    seen_p, seen_t = set(), set()
    for p, t in matching:
        if not (0 <= p < n_preds and 0 <= t < n_targets):
            raise ValueError(f"matching pair ({p}, {t}) is out of range")
        if p in seen_p or t in seen_t:
            raise ValueError(f"matching pair ({p}, {t}) reuses a prediction or target")
        seen_p.add(p)
        seen_t.add(t)


def total_loss(
    preds: Sequence[PredictionEncoding],
    targets: Sequence[Annotation],
    matching: Sequence[Tuple[int, int]],
    k: CameraIntrinsics,
    priors: CategoryPriors,
) -> LossBreakdown:
    """Sum over (pred index, target index) pairs, in the order given."""
    _check_matching(matching, len(preds), len(targets))
    terms_2d = Loss2DTerms()
    terms_3d = Loss3DTerms()
    for p, t in matching:
        pred, target = preds[p], targets[t]
        l2 = loss_2d(pred, target)
        terms_2d.objectness += l2.objectness
        terms_2d.classification += l2.classification
        terms_2d.box += l2.box
        if target.is_pseudo:
            # semi-pseudo-labels have no 3D ground truth
            continue
        l3 = loss_3d_disentangled(pred, target.cuboid, k, priors, target.category)
        terms_3d.center += l3.center
        terms_3d.dimensions += l3.dimensions
        terms_3d.orientation += l3.orientation
    loss_2d_value = terms_2d.total
    loss_3d_value = terms_3d.total
    return LossBreakdown(
        loss_2d=loss_2d_value,
        loss_3d=loss_3d_value,
        total=loss_2d_value + loss_3d_value,
        objectness=terms_2d.objectness,
        classification=terms_2d.classification,
        box=terms_2d.box,
        center=terms_3d.center,
        dimensions=terms_3d.dimensions,
        orientation=terms_3d.orientation,
    )


# ========== parameter vectors and finite differences ==========

# first index of the 3D fields in the parameter vector
def first_3d_index(class_names: Sequence[str]) -> int:
    return 5 + len(class_names)


def encoding_to_vector(pred: PredictionEncoding, class_names: Sequence[str]) -> np.ndarray:
    b, q = pred.box2d, pred.orientation_apparent
    return np.array(
        [b.center_u, b.center_v, b.width, b.height, pred.objectness]
        + [pred.class_probs[name] for name in class_names]
        + [pred.center_proj.u, pred.center_proj.v, pred.depth, *pred.dim_residuals, q.w, q.x, q.y, q.z],
        dtype=np.float64,
    )


def vector_to_encoding(vec: np.ndarray, class_names: Sequence[str]) -> PredictionEncoding:
    n = len(class_names)
    v = [float(x) for x in vec]
    o = first_3d_index(class_names)
    return PredictionEncoding(
        box2d=Box2D(center_u=v[0], center_v=v[1], width=v[2], height=v[3]),
        objectness=v[4],
        class_probs={name: v[5 + i] for i, name in enumerate(class_names)},
        center_proj=Pixel(u=v[o], v=v[o + 1]),
        depth=v[o + 2],
        dim_residuals=(v[o + 3], v[o + 4], v[o + 5]),
        orientation_apparent=Quaternion(w=v[o + 6], x=v[o + 7], y=v[o + 8], z=v[o + 9]),
    )


def prediction_loss_function(
    preds: Sequence[PredictionEncoding],
    targets: Sequence[Annotation],
    matching: Sequence[Tuple[int, int]],
    k: CameraIntrinsics,
    priors: CategoryPriors,
    pred_index: int,
    class_names: Sequence[str],
) -> Callable[[np.ndarray], float]:
    """total_loss as a function of one prediction's parameter vector."""
    others = list(preds)

    def f(vec: np.ndarray) -> float:
        others[pred_index] = vector_to_encoding(vec, class_names)
        return total_loss(others, targets, matching, k, priors).total

    return f


def _evaluate(f: Callable[[np.ndarray], float], x: np.ndarray) -> float:
    try:
        value = f(x)
    except (Spl3dError, ValueError) as e:
        raise NonDifferentiablePoint(f"loss undefined near the probe point: {e}") from e
    if not math.isfinite(value):
        raise NonDifferentiablePoint("loss is not finite near the probe point")
    return value


def central_difference(f: Callable[[np.ndarray], float], point: np.ndarray, epsilon: float) -> np.ndarray:
    point = np.asarray(point, dtype=np.float64)
    grad = np.zeros_like(point)
    for i in range(point.size):
        step = np.zeros_like(point)
        step[i] = epsilon
        grad[i] = (_evaluate(f, point + step) - _evaluate(f, point - step)) / (2.0 * epsilon)
    return grad


def gradient_check(
    f: Callable[[np.ndarray], float],
    point: np.ndarray,
    epsilon: float = 1e-4,
    analytic_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    scale_floor: float = 1.0,
) -> float:
    """
    Max relative discrepancy of the numerical gradient at point.

    With analytic_grad the central difference at epsilon is compared against
    it; otherwise central differences at epsilon and epsilon/10 are compared
    (Richardson self-consistency). Discrepancies are divided by
    max(|a|, |b|, scale_floor) per component.
    """
    reference = (np.asarray(analytic_grad(point), dtype=np.float64) if analytic_grad is not None
                 else central_difference(f, point, epsilon / 10.0))
    numeric = central_difference(f, point, epsilon)
    scale = np.maximum(np.maximum(np.abs(numeric), np.abs(reference)), scale_floor)
    return float(np.max(np.abs(numeric - reference) / scale)) if numeric.size else 0.0
