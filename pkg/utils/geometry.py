"""
Pinhole projection, quaternion rotation, cuboid corners and the
apparent/egocentric orientation conversion.

Conventions:
- camera frame x right, y down, z forward, meters, float64 throughout
- quaternions are Hamilton (w, x, y, z); q and -q are the same rotation
- cuboid corner i has sign triple CORNER_SIGNS[i] applied to
  (width/2, height/2, length/2); corner 7 - i is opposite to corner i
"""

import itertools
import math
from typing import List, Tuple

import numpy as np

from models.annotation_model import Box2D
from models.errors import CornerBehindCamera, NonPositiveDepth
from models.geometry_model import (
    CameraIntrinsics,
    Cuboid3D,
    Pixel,
    Point3,
    Quaternion,
)

# (-,-,-), (-,-,+), (-,+,-), (-,+,+), (+,-,-), (+,-,+), (+,+,-), (+,+,+)
CORNER_SIGNS: Tuple[Tuple[int, int, int], ...] = tuple(itertools.product((-1, 1), repeat=3))
_CORNER_SIGNS_ARRAY = np.array(CORNER_SIGNS, dtype=np.float64)


# ========== pinhole ==========

def project(k: CameraIntrinsics, p: Point3) -> Pixel:
    if p.z <= 0:
        raise NonPositiveDepth(f"cannot project point with depth {p.z}")
    return Pixel(u=k.fx * p.x / p.z + k.cx, v=k.fy * p.y / p.z + k.cy)


def backproject(k: CameraIntrinsics, px: Pixel, depth: float) -> Point3:
    if depth <= 0:
        raise NonPositiveDepth(f"cannot back-project to depth {depth}")
    return Point3(x=(px.u - k.cx) * depth / k.fx, y=(px.v - k.cy) * depth / k.fy, z=depth)


def project_points(k: CameraIntrinsics, points: np.ndarray) -> np.ndarray:
    """Vectorised project() for an (n, 3) array; returns (n, 2) pixels."""
    z = points[:, 2]
    if np.any(z <= 0):
        raise NonPositiveDepth("cannot project points with non-positive depth")
    u = k.fx * points[:, 0] / z + k.cx
    v = k.fy * points[:, 1] / z + k.cy
    return np.stack([u, v], axis=1)


# ========== quaternions ==========

def quat_multiply(a: Quaternion, b: Quaternion) -> Quaternion:
    w1, x1, y1, z1 = a.as_tuple()
    w2, x2, y2, z2 = b.as_tuple()
    return Quaternion(
        w=w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        x=w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        y=w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        z=w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    )


def quat_inverse(q: Quaternion) -> Quaternion:
    q = q.normalized()
    return Quaternion(w=q.w, x=-q.x, y=-q.y, z=-q.z)


def quat_to_matrix(q: Quaternion) -> np.ndarray:
    w, x, y, z = q.normalized().as_tuple()
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rotation_distance(a: Quaternion, b: Quaternion) -> float:
    """Angle in radians of the rotation taking a to b; sign-invariant."""
    d = quat_multiply(quat_inverse(a), b.normalized())
    vec = math.sqrt(d.x * d.x + d.y * d.y + d.z * d.z)
    return 2.0 * math.atan2(vec, abs(d.w))


def rotate(q: Quaternion, p: Point3) -> Point3:
    w, x, y, z = q.normalized().as_tuple()
    px, py, pz = p.as_tuple()
    # v' = v + 2w(u x v) + 2u x (u x v)
    cx = y * pz - z * py
    cy = z * px - x * pz
    cz = x * py - y * px
    ccx = y * cz - z * cy
    ccy = z * cx - x * cz
    ccz = x * cy - y * cx
    return Point3(
        x=px + 2 * (w * cx + ccx),
        y=py + 2 * (w * cy + ccy),
        z=pz + 2 * (w * cz + ccz),
    )


def yaw_of(q: Quaternion) -> float:
    """Heading on the x-z plane: angle of the rotated +z axis, measured towards +x."""
    forward = quat_to_matrix(q)[:, 2]
    return math.atan2(forward[0], forward[2])


# ========== cuboids ==========

def corners_array(c: Cuboid3D) -> np.ndarray:
    """(8, 3) corners in CORNER_SIGNS order."""
    half = np.array(c.dims.as_tuple()) / 2.0
    offsets = _CORNER_SIGNS_ARRAY * half
    return offsets @ quat_to_matrix(c.orientation).T + np.array(c.center.as_tuple())


def cuboid_corners(c: Cuboid3D) -> List[Point3]:
    return [Point3(x=float(x), y=float(y), z=float(z)) for x, y, z in corners_array(c)]


def project_cuboid_to_box2d(k: CameraIntrinsics, c: Cuboid3D) -> Box2D:
    corners = corners_array(c)
    if np.any(corners[:, 2] <= 0):
        raise CornerBehindCamera("cuboid has a corner at or behind the image plane")
    pixels = project_points(k, corners)
    u1, v1 = pixels.min(axis=0)
    u2, v2 = pixels.max(axis=0)
    return Box2D.from_corners(float(u1), float(v1), float(u2), float(v2))


# ========== orientation ==========

def ray_rotation(center: Point3) -> Quaternion:
    """Minimal rotation taking +z onto the viewing ray through center."""
    if center.z <= 0:
        raise NonPositiveDepth(f"viewing ray undefined for depth {center.z}")
    n = math.sqrt(center.x ** 2 + center.y ** 2 + center.z ** 2)
    dx, dy, dz = center.x / n, center.y / n, center.z / n
    # q = normalize(1 + z.d, z x d) with z = (0, 0, 1)
    return Quaternion(w=1.0 + dz, x=-dy, y=dx, z=0.0).normalized()


def apparent_from_egocentric(q_ego: Quaternion, center: Point3) -> Quaternion:
    return quat_multiply(quat_inverse(ray_rotation(center)), q_ego.normalized())


def egocentric_from_apparent(q_app: Quaternion, center: Point3) -> Quaternion:
    return quat_multiply(ray_rotation(center), q_app.normalized())
