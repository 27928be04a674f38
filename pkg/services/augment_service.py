"""
3D-consistent zoom and shift augmentation.

The image is zoomed about its center and then shifted; the virtual camera
follows the same affine map (focal lengths scaled, principal point moved) so
every 3D annotation stays valid without modification:

    project(adjust_intrinsics(params, k), X) == transform_pixel(params, k, project(k, X))
"""

import math
from typing import Optional

import numpy as np

from models.annotation_model import Box2D, Frame, Raster
from models.config_model import AugmentConfig, ScaleBounds, ZoomShiftParams
from models.geometry_model import CameraIntrinsics, Pixel
from utils.geometry import project


def draw_scale(bounds: ScaleBounds, rng: np.random.Generator) -> float:
    """Log-uniform draw, so zooming in by s and out by 1/s are equally likely."""
    if bounds.lower == bounds.upper:
        return bounds.lower
    return float(math.exp(rng.uniform(math.log(bounds.lower), math.log(bounds.upper))))


def draw_params(config: AugmentConfig, rng: np.random.Generator, k: CameraIntrinsics) -> ZoomShiftParams:
    scale = draw_scale(config.scale_bounds, rng)
    f = config.shift_fraction
    shift_u = float(rng.uniform(-f * k.width, f * k.width)) if f > 0 else 0.0
    shift_v = float(rng.uniform(-f * k.height, f * k.height)) if f > 0 else 0.0
    return ZoomShiftParams(scale=scale, shift_u=shift_u, shift_v=shift_v)


def _affine(value: float, center: float, scale: float, shift: float) -> float:
    # scale * (value - center) + center + shift, written to be exact at identity
    return value + (scale - 1.0) * (value - center) + shift


def transform_pixel(params: ZoomShiftParams, k: CameraIntrinsics, p: Pixel) -> Pixel:
    cu, cv = k.image_center
    return Pixel(
        u=_affine(p.u, cu, params.scale, params.shift_u),
        v=_affine(p.v, cv, params.scale, params.shift_v),
    )


def adjust_intrinsics(params: ZoomShiftParams, k: CameraIntrinsics) -> CameraIntrinsics:
    cu, cv = k.image_center
    return CameraIntrinsics(
        fx=params.scale * k.fx,
        fy=params.scale * k.fy,
        cx=_affine(k.cx, cu, params.scale, params.shift_u),
        cy=_affine(k.cy, cv, params.scale, params.shift_v),
        width=k.width,
        height=k.height,
    )


def transform_box(params: ZoomShiftParams, k: CameraIntrinsics, box: Box2D) -> Box2D:
    center = transform_pixel(params, k, Pixel(u=box.center_u, v=box.center_v))
    return Box2D(
        center_u=center.u,
        center_v=center.v,
        width=box.width * params.scale,
        height=box.height * params.scale,
    )


def visible_fraction(box: Box2D, k: CameraIntrinsics) -> float:
    """Share of the box area that lies inside the image."""
    if box.area == 0.0:
        inside = 0.0 <= box.center_u <= k.width and 0.0 <= box.center_v <= k.height
        return 1.0 if inside else 0.0
    u1, v1, u2, v2 = box.corners()
    iw = max(0.0, min(u2, k.width) - max(u1, 0.0))
    ih = max(0.0, min(v2, k.height) - max(v1, 0.0))
    return iw * ih / box.area


def resample(raster: Raster, params: ZoomShiftParams) -> Raster:
    """Bilinear resampling through the inverse affine map; zero outside the source."""
    w, h = raster.width, raster.height
    cu, cv = w / 2.0, h / 2.0
    # pixel (i, j) covers [j, j+1) x [i, i+1); sample at its center
    xs = (np.arange(w) + 0.5 - cu - params.shift_u) / params.scale + cu - 0.5
    ys = (np.arange(h) + 0.5 - cv - params.shift_v) / params.scale + cv - 0.5
    valid_x = (xs >= 0.0) & (xs <= w - 1)
    valid_y = (ys >= 0.0) & (ys <= h - 1)

    x0 = np.clip(np.floor(xs), 0, max(w - 2, 0)).astype(np.int64)
    y0 = np.clip(np.floor(ys), 0, max(h - 2, 0)).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.where(valid_x, xs - x0, 0.0)[None, :, None]
    fy = np.where(valid_y, ys - y0, 0.0)[:, None, None]

    v = raster.values
    top = v[y0][:, x0] * (1.0 - fx) + v[y0][:, x1] * fx
    bottom = v[y1][:, x0] * (1.0 - fx) + v[y1][:, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    out[~(valid_y[:, None] & valid_x[None, :])] = 0.0
    return Raster(width=w, height=h, values=out)


def augment_frame(frame: Frame, params: ZoomShiftParams, visibility_threshold: float) -> Frame:
    k = frame.intrinsics
    kept = []
    for annotation in frame.annotations:
        box = transform_box(params, k, annotation.box2d)
        if visible_fraction(box, k) < visibility_threshold:
            continue
        # cuboids stay untouched, the virtual camera absorbs the zoom
        kept.append(annotation.model_copy(update={"box2d": box}))
    raster: Optional[Raster] = resample(frame.raster, params) if frame.raster is not None else None
    return frame.model_copy(update={
        "intrinsics": adjust_intrinsics(params, k),
        "raster": raster,
        "annotations": kept,
    })


def emulated_depth(depth: float, scale: float) -> float:
    """Depth at which an object would appear at its zoomed size."""
    return depth / scale


def vanilla_reprojection_error(frame: Frame, params: ZoomShiftParams) -> float:
    """
    Largest pixel gap between zoomed cuboid centers and their projection when
    the intrinsics are *not* adjusted, i.e. what a plain 2D zoom breaks.
    """
    k = frame.intrinsics
    worst = 0.0
    for annotation in frame.annotations:
        if annotation.cuboid is None:
            continue
        original = project(k, annotation.cuboid.center)
        moved = transform_pixel(params, k, original)
        worst = max(worst, math.hypot(moved.u - original.u, moved.v - original.v))
    return worst
