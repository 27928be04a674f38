"""Top-view footprint polygons on the x-z plane."""

import math

import numpy as np
from shapely.geometry import Polygon


def rectangle(center_x: float, center_z: float, width: float, length: float, yaw: float) -> np.ndarray:
    """Counter-clockwise corners of a yaw-rotated width x length rectangle, shape (4, 2)."""
    # local x axis -> (cos, -sin), local z axis -> (sin, cos)
    ax = np.array([math.cos(yaw), -math.sin(yaw)]) * (width / 2.0)
    az = np.array([math.sin(yaw), math.cos(yaw)]) * (length / 2.0)
    c = np.array([center_x, center_z])
    return np.array([c - ax - az, c + ax - az, c + ax + az, c - ax + az])


def convex_iou(a: np.ndarray, b: np.ndarray) -> float:
    poly_a, poly_b = Polygon(a), Polygon(b)
    area_a, area_b = poly_a.area, poly_b.area
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    inter = poly_a.intersection(poly_b).area
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))
