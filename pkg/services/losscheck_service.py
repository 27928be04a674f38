"""
Self-checks of the training loss at random valid points: masking of
semi-pseudo-label targets, disentanglement of the 3D groups, exactness at
the perfect prediction, and finite-difference gradient consistency.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from models.annotation_model import Annotation, Box2D
from models.config_model import SceneConfig
from models.errors import NonDifferentiablePoint
from models.geometry_model import CameraIntrinsics, Cuboid3D, Pixel, Point3, Quaternion
from models.loss_model import CategoryPriors, PredictionEncoding
from services.loss_service import (
    encode_target,
    encoding_to_vector,
    gradient_check,
    loss_3d_disentangled,
    prediction_loss_function,
    total_loss,
)
from utils.geometry import project_cuboid_to_box2d, quat_multiply

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-3
PERFECT_TOLERANCE = 1e-12


class CheckResult(BaseModel):
    name: str
    passed: bool
    trials: int
    detail: str = ""


class LossCase(BaseModel):
    """One real target, one semi-pseudo-label target and a noisy prediction for each."""

    intrinsics: CameraIntrinsics
    priors: CategoryPriors
    class_names: List[str]
    targets: List[Annotation]
    preds: List[PredictionEncoding]
    matching: List[Tuple[int, int]]


def _random_target(rng: np.random.Generator, k: CameraIntrinsics, priors: CategoryPriors,
                   names: Sequence[str]) -> Annotation:
    category = names[int(rng.integers(len(names)))]
    prior = priors.get(category)
    z = float(rng.uniform(10.0, 80.0))
    cuboid = Cuboid3D(
        center=Point3(x=float(rng.uniform(-0.3, 0.3)) * z, y=float(rng.uniform(-0.1, 0.2)) * z, z=z),
        dims=prior.model_copy(update={
            "width": prior.width * float(rng.uniform(0.8, 1.2)),
            "height": prior.height * float(rng.uniform(0.8, 1.2)),
            "length": prior.length * float(rng.uniform(0.8, 1.2)),
        }),
        orientation=Quaternion.from_yaw(float(rng.uniform(-math.pi, math.pi))),
    )
    return Annotation(category=category, box2d=project_cuboid_to_box2d(k, cuboid), cuboid=cuboid)


def _perturb(pred: PredictionEncoding, rng: np.random.Generator) -> PredictionEncoding:
    """A valid prediction near pred: probabilities kept inside (0, 1), sizes positive."""
    b = pred.box2d
    q = pred.orientation_apparent
    dq = rng.normal(0.0, 0.05, 4)
    return PredictionEncoding(
        box2d=Box2D(center_u=b.center_u + float(rng.normal(0.0, 2.0)),
                    center_v=b.center_v + float(rng.normal(0.0, 2.0)),
                    width=b.width * float(rng.uniform(0.8, 1.2)),
                    height=b.height * float(rng.uniform(0.8, 1.2))),
        objectness=float(rng.uniform(0.2, 0.9)),
        class_probs={name: float(rng.uniform(0.6, 0.9)) if p >= 1.0 else float(rng.uniform(0.05, 0.3))
                     for name, p in pred.class_probs.items()},
        center_proj=Pixel(u=pred.center_proj.u + float(rng.normal(0.0, 3.0)),
                          v=pred.center_proj.v + float(rng.normal(0.0, 3.0))),
        depth=pred.depth * float(rng.uniform(0.9, 1.1)),
        dim_residuals=tuple(r + float(rng.normal(0.0, 0.1)) for r in pred.dim_residuals),
        orientation_apparent=Quaternion(w=q.w + dq[0], x=q.x + dq[1], y=q.y + dq[2], z=q.z + dq[3]).normalized(),
    )


def random_case(rng: np.random.Generator, scene: Optional[SceneConfig] = None) -> LossCase:
    scene = scene or SceneConfig()
    k = scene.intrinsics
    priors = CategoryPriors(priors=scene.priors())
    names = sorted(priors.priors)
    real = _random_target(rng, k, priors, names)
    detected = _random_target(rng, k, priors, names)
    pseudo = Annotation(category=detected.category, box2d=detected.box2d, cuboid=None,
                        confidence=float(rng.uniform(0.5, 1.0)), is_pseudo=True)
    targets = [real, pseudo]
    preds = [_perturb(encode_target(t, k, priors, names), rng) for t in targets]
    return LossCase(intrinsics=k, priors=priors, class_names=names, targets=targets, preds=preds,
                    matching=[(0, 0), (1, 1)])


def _with_3d(pred: PredictionEncoding, rng: np.random.Generator, group: str) -> PredictionEncoding:
    if group == "center":
        return pred.model_copy(update={
            "center_proj": Pixel(u=pred.center_proj.u + float(rng.normal(0.0, 5.0)), v=pred.center_proj.v),
            "depth": pred.depth * float(rng.uniform(0.8, 1.2)),
        })
    if group == "dimensions":
        return pred.model_copy(update={
            "dim_residuals": tuple(r + float(rng.normal(0.0, 0.2)) for r in pred.dim_residuals)})
    q = Quaternion.from_yaw(float(rng.uniform(0.1, 1.0)))
    return pred.model_copy(update={"orientation_apparent": quat_multiply(q, pred.orientation_apparent)})


GROUPS = ("center", "dimensions", "orientation")


def check_masking(rng: np.random.Generator, trials: int) -> CheckResult:
    failures = 0
    for _ in range(trials):
        case = random_case(rng)
        base = total_loss(case.preds, case.targets, case.matching, case.intrinsics, case.priors)
        group = GROUPS[int(rng.integers(len(GROUPS)))]
        pseudo_preds = [case.preds[0], _with_3d(case.preds[1], rng, group)]
        moved = total_loss(pseudo_preds, case.targets, case.matching, case.intrinsics, case.priors)
        if moved != base:
            failures += 1
    return CheckResult(name="3D fields ignored for semi-pseudo-labels", passed=failures == 0, trials=trials,
                       detail=f"{failures} changed totals")


def check_disentanglement(rng: np.random.Generator, trials: int) -> CheckResult:
    failures = 0
    for _ in range(trials):
        case = random_case(rng)
        target = case.targets[0]
        group = GROUPS[int(rng.integers(len(GROUPS)))]
        before = loss_3d_disentangled(case.preds[0], target.cuboid, case.intrinsics, case.priors, target.category)
        after = loss_3d_disentangled(_with_3d(case.preds[0], rng, group), target.cuboid, case.intrinsics,
                                     case.priors, target.category)
        others_equal = all(getattr(before, g) == getattr(after, g) for g in GROUPS if g != group)
        if not others_equal or getattr(before, group) == getattr(after, group):
            failures += 1
    return CheckResult(name="3D groups disentangled", passed=failures == 0, trials=trials,
                       detail=f"{failures} leaked or unchanged sub-terms")


def check_3d_penalised(rng: np.random.Generator, trials: int) -> CheckResult:
    failures = 0
    for _ in range(trials):
        case = random_case(rng)
        perfect = [encode_target(t, case.intrinsics, case.priors, case.class_names) for t in case.targets]
        base = total_loss(perfect, case.targets, case.matching, case.intrinsics, case.priors)
        group = GROUPS[int(rng.integers(len(GROUPS)))]
        moved = [_with_3d(perfect[0], rng, group), perfect[1]]
        if not total_loss(moved, case.targets, case.matching, case.intrinsics, case.priors).loss_3d > base.loss_3d:
            failures += 1
    return CheckResult(name="3D errors penalised for annotated targets", passed=failures == 0, trials=trials,
                       detail=f"{failures} perturbations without a loss increase")


def check_perfect_prediction(rng: np.random.Generator, trials: int) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        case = random_case(rng)
        perfect = [encode_target(t, case.intrinsics, case.priors, case.class_names) for t in case.targets]
        worst = max(worst, total_loss(perfect, case.targets, case.matching, case.intrinsics, case.priors).total)
    return CheckResult(name="perfect prediction has zero loss", passed=worst <= PERFECT_TOLERANCE, trials=trials,
                       detail=f"max loss {worst:.3g}")


def check_gradients(rng: np.random.Generator, trials: int) -> CheckResult:
    worst = 0.0
    skipped = 0
    for _ in range(trials):
        case = random_case(rng)
        f = prediction_loss_function(case.preds, case.targets, case.matching, case.intrinsics, case.priors,
                                     0, case.class_names)
        try:
            worst = max(worst, gradient_check(f, encoding_to_vector(case.preds[0], case.class_names)))
        except NonDifferentiablePoint as e:
            logger.debug("gradient check skipped: %s", e)
            skipped += 1
    passed = worst < GRADIENT_TOLERANCE and skipped < trials
    return CheckResult(name="finite-difference gradients consistent", passed=passed, trials=trials,
                       detail=f"max relative discrepancy {worst:.3g}, {skipped} skipped")


def run_losscheck(points: int = 100, seed: int = 0) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    results = [
        check_perfect_prediction(rng, points),
        check_masking(rng, points),
        check_3d_penalised(rng, points),
        check_disentanglement(rng, points),
        check_gradients(rng, points),
    ]
    for r in results:
        logger.info("%s: %s (%s)", r.name, "pass" if r.passed else "FAIL", r.detail)
    return results
