"""
Synthetic scenes with full ground truth out to the far range, plus the two
stand-in models that consume them: a 2D detector oracle and a noisy 3D
predictor whose longitudinal error grows with distance.

Randomness comes from generators seeded with (seed, crc32(frame id),
crc32(stream)), so every frame and every stream is reproducible on its own
and independent of the order frames are produced in.
"""

import logging
import math
import zlib
from typing import Dict, List, Optional, Sequence

import cv2
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from models.annotation_model import Annotation, Box2D, CameraPosition, Detection2D, Frame, Raster
from models.config_model import DatagenConfig, ErrorModel, SceneConfig
from models.errors import PlacementExhausted
from models.geometry_model import Cuboid3D, Dimensions3, Point3, Quaternion
from services.spl_service import iou_2d
from utils.geometry import corners_array, project_cuboid_to_box2d, project_points, quat_multiply
from utils.work_queue import map_frames

logger = logging.getLogger(__name__)

SCENE_STREAM = "scene"
DETECTOR_STREAM = "detector"
PREDICTOR_STREAM = "predictor"

# RGB in [0, 255]
_PALETTE = [(220, 60, 60), (60, 120, 220), (240, 200, 40), (60, 200, 120), (200, 80, 200), (120, 220, 220)]
_SKY = (135, 170, 210)
_GROUND = (90, 90, 90)


def frame_rng(seed: int, frame_id: str, stream: str = SCENE_STREAM) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(frame_id.encode()), zlib.crc32(stream.encode())])


# ========== scenes ==========

def sample_longitudinal(config: SceneConfig, rng: np.random.Generator, size: int = 1,
                        backward: bool = False) -> np.ndarray:
    lo, hi = config.backward_longitudinal_range if backward else config.longitudinal_range
    u = rng.random(size)
    if config.longitudinal_distribution == "uniform":
        return lo + u * (hi - lo)
    # truncated exponential by inverse CDF
    s = config.exponential_scale
    return lo - s * np.log1p(-u * (1.0 - math.exp(-(hi - lo) / s)))


def _sample_yaw(config: SceneConfig, rng: np.random.Generator) -> float:
    if config.yaw_distribution == "uniform":
        return float(rng.uniform(-math.pi, math.pi))
    yaw = float(rng.normal(0.0, math.radians(config.yaw_std_deg)))
    # oncoming traffic half of the time
    return yaw + math.pi if rng.random() < 0.5 else yaw


def _sample_dims(prior: Dimensions3, jitter: float, rng: np.random.Generator) -> Dimensions3:
    factors = np.clip(1.0 + jitter * rng.standard_normal(3), 0.5, 1.5)
    w, h, l = (float(p * f) for p, f in zip(prior.as_tuple(), factors))
    return Dimensions3(width=w, height=h, length=l)


def _footprint_radius(c: Cuboid3D) -> float:
    return 0.5 * math.hypot(c.dims.width, c.dims.length)


def _visible(config: SceneConfig, cuboid: Cuboid3D) -> bool:
    """2D box center inside the image and every corner in front of the camera."""
    k = config.intrinsics
    if cuboid.center.z < config.min_visible_range:
        return False
    if np.any(corners_array(cuboid)[:, 2] <= 0.0):
        return False
    box = project_cuboid_to_box2d(k, cuboid)
    return 0.0 <= box.center_u < k.width and 0.0 <= box.center_v < k.height


def generate_scene(config: SceneConfig, seed: int, frame_id: str = "000000",
                   camera: CameraPosition = "front") -> Frame:
    rng = frame_rng(seed, frame_id)
    k = config.intrinsics
    lo, hi = config.object_count
    count = int(rng.integers(lo, hi + 1))
    weights = np.array([c.weight for c in config.categories])
    weights = weights / weights.sum()

    placed: List[Annotation] = []
    for index in range(count):
        for _ in range(config.max_attempts):
            spec = config.categories[int(rng.choice(len(config.categories), p=weights))]
            dims = _sample_dims(spec.prior, spec.jitter, rng)
            z = float(sample_longitudinal(config, rng, backward=camera == "back")[0])
            x = float(rng.uniform(*config.lateral_range))
            yaw = _sample_yaw(config, rng)
            cuboid = Cuboid3D(
                # resting on the ground plane, camera_height below the camera
                center=Point3(x=x, y=config.camera_height - dims.height / 2.0, z=z),
                dims=dims,
                orientation=Quaternion.from_yaw(yaw),
            )
            if not _visible(config, cuboid):
                continue
            if any(math.hypot(x - a.cuboid.center.x, z - a.cuboid.center.z)
                   < _footprint_radius(cuboid) + _footprint_radius(a.cuboid) + config.min_separation
                   for a in placed):
                continue
            box = project_cuboid_to_box2d(k, cuboid)
            if any(iou_2d(box, a.box2d) > config.max_box_iou for a in placed):
                continue
            placed.append(Annotation(category=spec.name, box2d=box, cuboid=cuboid))
            break
        else:
            raise PlacementExhausted(
                f"frame {frame_id}: could not place object {index} after {config.max_attempts} attempts")
    return Frame(id=frame_id, camera=camera, intrinsics=k, annotations=placed)


def frame_ids(frames: int, backward: bool) -> List[str]:
    ids = []
    for i in range(frames):
        ids.append(f"{i:06d}")
        if backward:
            ids.append(f"{i:06d}_back")
    return ids


async def generate_dataset(config: SceneConfig, frames: int, seed: int, workers: int = 1,
                           render: bool = False) -> List[Frame]:
    def build(frame_id: str) -> Frame:
        camera: CameraPosition = "back" if frame_id.endswith("_back") else "front"
        frame = generate_scene(config, seed, frame_id, camera)
        if render:
            frame = frame.model_copy(update={"raster": render_raster(frame)})
        return frame

    generated = await map_frames(build, frame_ids(frames, config.backward_frames), workers)
    logger.info("generated %d frames with %d objects", len(generated),
                sum(len(f.annotations) for f in generated))
    return generated


# ========== annotation regime ==========

def apply_annotation_cutoff(frame: Frame, max_range: float = 120.0) -> Frame:
    """Drop 3D annotations beyond max_range, as if the labelling sensor could not reach them."""
    kept = [a for a in frame.annotations if a.cuboid is None or a.cuboid.center.z <= max_range]
    if len(kept) == len(frame.annotations):
        return frame
    return frame.with_annotations(kept)


def remove_categories(frame: Frame, names: Sequence[str]) -> Frame:
    """Drop every annotation of the given categories (classes missing from the 3D labels)."""
    names = set(names)
    kept = [a for a in frame.annotations if a.category not in names]
    if len(kept) == len(frame.annotations):
        return frame
    return frame.with_annotations(kept)


# ========== stand-in models ==========

def _noisy_box(box: Box2D, sigma: float, rng: np.random.Generator) -> Box2D:
    du, dv, dw, dh = rng.normal(0.0, sigma, 4) if sigma > 0 else (0.0, 0.0, 0.0, 0.0)
    return Box2D(
        center_u=box.center_u + du,
        center_v=box.center_v + dv,
        width=max(box.width + dw, 0.5 * box.width),
        height=max(box.height + dh, 0.5 * box.height),
    )


def _confidence(error_model: ErrorModel, rng: np.random.Generator) -> float:
    noise = abs(rng.normal(0.0, error_model.confidence_noise)) if error_model.confidence_noise > 0 else 0.0
    return float(min(1.0, max(0.0, 1.0 - noise)))


def _distance(annotation: Annotation) -> float:
    return annotation.cuboid.center.z if annotation.cuboid is not None else 0.0


def oracle_detector_2d(frame: Frame, error_model: ErrorModel, seed: int = 0,
                       categories: Optional[Sequence[str]] = None) -> List[Detection2D]:
    """
    Every object of the full-ground-truth frame, minus distance-dependent
    dropout, with its projected box jittered by box_noise_px.
    """
    rng = frame_rng(seed, frame.id, DETECTOR_STREAM)
    names = sorted(set(categories or ()) | {a.category for a in frame.annotations})
    detections = []
    for annotation in frame.annotations:
        drop = rng.random() < error_model.dropout(_distance(annotation))
        box = _noisy_box(annotation.box2d, error_model.box_noise_px, rng)
        confidence = _confidence(error_model, rng)
        if drop:
            continue
        detections.append(Detection2D(
            box=box,
            objectness=confidence,
            class_probs={name: 1.0 if name == annotation.category else 0.0 for name in names},
        ))
    return detections


def noisy_predictor_3d(frame: Frame, error_model: ErrorModel, seed: int = 0) -> List[Annotation]:
    """
    Perturbed copies of the frame's cuboids: longitudinal noise with std
    coef * distance, constant lateral and heading noise, distance-dependent
    dropout. The 2D box is the ground-truth box with pixel noise.
    """
    rng = frame_rng(seed, frame.id, PREDICTOR_STREAM)
    predictions = []
    for annotation in frame.annotations:
        if annotation.cuboid is None:
            continue
        c = annotation.cuboid
        drop = rng.random() < error_model.dropout(c.center.z)
        dz, dx, dyaw = rng.standard_normal(3)
        box = _noisy_box(annotation.box2d, error_model.box_noise_px, rng)
        confidence = _confidence(error_model, rng)
        if drop:
            continue
        z = max(c.center.z + dz * error_model.longitudinal_noise_coef * c.center.z, 0.1 * c.center.z)
        x = c.center.x + dx * error_model.lateral_noise_std
        yaw_error = dyaw * math.radians(error_model.orientation_noise_deg)
        orientation = c.orientation
        if yaw_error != 0.0:
            orientation = quat_multiply(Quaternion.from_yaw(yaw_error), orientation)
        predictions.append(Annotation(
            category=annotation.category,
            box2d=box,
            cuboid=Cuboid3D(center=Point3(x=x, y=c.center.y, z=z), dims=c.dims, orientation=orientation),
            confidence=confidence,
        ))
    return predictions


# ========== rasters ==========

def render_raster(frame: Frame, categories: Optional[Sequence[str]] = None) -> Raster:
    """Flat-shaded cuboid silhouettes over a sky/ground backdrop, painted far to near."""
    k = frame.intrinsics
    canvas = np.empty((k.height, k.width, 3), dtype=np.uint8)
    horizon = int(min(max(round(k.cy), 0), k.height))
    canvas[:horizon] = _SKY
    canvas[horizon:] = _GROUND
    names = sorted(set(categories or ()) | {a.category for a in frame.annotations})
    colours = {name: _PALETTE[i % len(_PALETTE)] for i, name in enumerate(names)}
    solids = sorted((a for a in frame.annotations if a.cuboid is not None),
                    key=lambda a: -a.cuboid.center.z)
    for annotation in solids:
        corners = corners_array(annotation.cuboid)
        if np.any(corners[:, 2] <= 0.0):
            continue
        pixels = np.round(project_points(k, corners)).astype(np.int32)
        hull = cv2.convexHull(pixels)
        # darker with distance
        shade = max(0.35, 1.0 - annotation.cuboid.center.z / 300.0)
        colour = tuple(int(ch * shade) for ch in colours[annotation.category])
        cv2.fillConvexPoly(canvas, hull, colour)
    return Raster(width=k.width, height=k.height, values=canvas.astype(np.float64) / 255.0)


# ========== full synthetic run ==========

class SyntheticRun(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    ground_truth: List[Frame] = Field(default_factory=list)
    annotated: List[Frame] = Field(default_factory=list)
    detections: Dict[str, List[Detection2D]] = Field(default_factory=dict)
    predictions: Dict[str, List[Annotation]] = Field(default_factory=dict)


async def synthesize(config: DatagenConfig, frames: int, seed: int, workers: int = 1,
                     render: bool = False) -> SyntheticRun:
    """Full ground truth, its range-limited annotated copy, and both stand-in model outputs."""
    ground_truth = await generate_dataset(config.scene, frames, seed, workers, render)
    unannotated = [c.name for c in config.scene.categories if not c.annotated_3d]
    names = [c.name for c in config.scene.categories]

    def derive(frame: Frame):
        annotated = apply_annotation_cutoff(remove_categories(frame, unannotated), config.annotation_cutoff)
        return (annotated,
                oracle_detector_2d(frame, config.error_model, seed, names),
                noisy_predictor_3d(frame, config.error_model, seed))

    derived = await map_frames(derive, ground_truth, workers)
    run = SyntheticRun(ground_truth=ground_truth)
    for frame, (annotated, detections, predictions) in zip(ground_truth, derived):
        run.annotated.append(annotated)
        run.detections[frame.id] = detections
        run.predictions[frame.id] = predictions
    kept = sum(len(f.annotations) for f in run.annotated)
    logger.info("annotation cutoff at %.0f m keeps %d of %d objects", config.annotation_cutoff, kept,
                sum(len(f.annotations) for f in ground_truth))
    return run
