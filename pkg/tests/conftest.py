import numpy as np
import pytest

from models.annotation_model import Annotation, Box2D, Detection2D, Frame
from models.config_model import SceneConfig
from models.geometry_model import CameraIntrinsics, Cuboid3D, Dimensions3, Point3, Quaternion
from models.loss_model import CategoryPriors
from utils.geometry import project_cuboid_to_box2d


@pytest.fixture
def k():
    """The 1920x1080 camera used throughout the examples."""
    return CameraIntrinsics(fx=1000.0, fy=1000.0, cx=960.0, cy=540.0, width=1920, height=1080)


@pytest.fixture
def priors():
    return CategoryPriors(priors=SceneConfig().priors())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_cuboid(x=0.0, y=0.0, z=20.0, width=1.8, height=1.5, length=4.5, yaw=0.0) -> Cuboid3D:
    return Cuboid3D(
        center=Point3(x=x, y=y, z=z),
        dims=Dimensions3(width=width, height=height, length=length),
        orientation=Quaternion.from_yaw(yaw),
    )


def make_annotation(k: CameraIntrinsics, category="car", **cuboid) -> Annotation:
    c = make_cuboid(**cuboid)
    return Annotation(category=category, box2d=project_cuboid_to_box2d(k, c), cuboid=c)


def make_detection(box: Box2D, category="car", confidence=0.9, classes=("car", "large_vehicle", "pedestrian")):
    return Detection2D(box=box, objectness=confidence,
                       class_probs={name: 1.0 if name == category else 0.0 for name in classes})


def make_frame(k: CameraIntrinsics, annotations=(), frame_id="f0", camera="front") -> Frame:
    return Frame(id=frame_id, camera=camera, intrinsics=k, annotations=list(annotations))
