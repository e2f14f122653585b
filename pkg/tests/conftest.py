import cv2
import numpy as np
import pytest

from voxflow.calib import CameraRig, Intrinsics

cv2.setNumThreads(1)


@pytest.fixture
def intr():
    return Intrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)


@pytest.fixture
def small_intr():
    return Intrinsics(fx=100.0, fy=100.0, cx=32.0, cy=24.0, width=64, height=48)


@pytest.fixture
def small_rig(small_intr):
    return CameraRig.identity(small_intr)


def textured_frame(width, height, seed=0, cell=6):
    """Reproducible high-frequency test image in [0, 1]."""
    rng = np.random.default_rng(seed)
    coarse = rng.random((height // cell + 2, width // cell + 2))
    img = cv2.resize(coarse, (width, height), interpolation=cv2.INTER_CUBIC)
    return np.clip(img, 0, 1).astype(np.float32)
