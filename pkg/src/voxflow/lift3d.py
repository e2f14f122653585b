"""Lift a 2D flow field into a cloud of 3D motion vectors.

Each RGB pixel is registered to a depth pixel at time t and, through its
flow displacement, to a depth pixel at time t+1. Both depth samples are
back-projected and differenced, giving a per-point 3D motion vector in
millimeters anchored at the time-t position. Pixels that fail
registration or carry invalid depth at either endpoint are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calib import LUT_UNMAPPED, CameraRig, backproject_array
from .errors import DimensionMismatchError


@dataclass
class MotionCloud:
    """3D points (mm) with attached motion vectors (mm per frame pair)."""

    points: np.ndarray  # (N, 3) float64
    motions: np.ndarray  # (N, 3) float64
    frame_index: int = 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.motions = np.asarray(self.motions, dtype=np.float64).reshape(-1, 3)
        if self.points.shape != self.motions.shape:
            raise DimensionMismatchError(
                f"points {self.points.shape} vs motions {self.motions.shape}"
            )

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.motions, axis=1)


def lift(
    flow: np.ndarray,
    depth_t: np.ndarray,
    depth_t1: np.ndarray,
    rig: CameraRig,
    frame_index: int = 0,
) -> MotionCloud:
    """Lift one frame pair's flow field into a motion cloud.

    Flow endpoints are rounded to the nearest RGB pixel before registration;
    a pixel contributes only if registration and depth are valid at both
    endpoints. Point order follows the row-major RGB pixel scan, so output
    is deterministic.
    """
    flow = np.asarray(flow)
    intr = rig.depth_intrinsics
    rh, rw = rig.rgb_height, rig.rgb_width
    if flow.shape != (rh, rw, 2):
        raise DimensionMismatchError(f"flow shape {flow.shape} does not match RGB {rh}x{rw}")
    for name, frame in (("depth_t", depth_t), ("depth_t1", depth_t1)):
        if frame.shape != (intr.height, intr.width):
            raise DimensionMismatchError(
                f"{name} shape {frame.shape} does not match depth {intr.height}x{intr.width}"
            )

    ii, jj = _pixel_grid(rh, rw)
    # endpoint RGB pixel, rounded to nearest
    ei = np.rint(ii + flow[..., 0].ravel()).astype(np.int32)
    ej = np.rint(jj + flow[..., 1].ravel()).astype(np.int32)
    ok = (ei >= 0) & (ei < rw) & (ej >= 0) & (ej < rh)

    reg = rig.registration
    end_lin = np.where(ok, ej.astype(np.int64) * rw + ei, 0)
    if reg.is_identity:
        # both registrations are the identity; only the endpoint depth lookup
        # needs a gather
        u1, w1 = ei, ej
        d0 = depth_t.ravel()
        d1 = depth_t1.ravel()[end_lin]
    else:
        ok &= reg.mapped
        u1 = reg.u[end_lin]
        w1 = reg.w[end_lin]
        ok &= u1 != LUT_UNMAPPED
        d0 = depth_t.ravel()[reg.lin]
        lin1 = np.where(ok, w1.astype(np.int64) * intr.width + u1, 0)
        d1 = depth_t1.ravel()[lin1]
    ok &= (d0 > 0) & (d1 > 0)

    keep = np.flatnonzero(ok)
    mm = rig.depth_scale * 1000.0
    p0 = backproject_array(reg.u[keep], reg.w[keep], d0[keep].astype(np.float64) * mm, intr)
    p1 = backproject_array(u1[keep], w1[keep], d1[keep].astype(np.float64) * mm, intr)
    return MotionCloud(points=p0, motions=p1 - p0, frame_index=frame_index)


_GRID_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _pixel_grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Raveled float32 column/row coordinate arrays, cached per frame shape."""
    key = (h, w)
    if key not in _GRID_CACHE:
        ii, jj = np.meshgrid(np.arange(w, dtype=np.float32), np.arange(h, dtype=np.float32))
        _GRID_CACHE[key] = (ii.ravel(), jj.ravel())
    return _GRID_CACHE[key]


def filter_cloud(cloud: MotionCloud, min_mag: float = 0.5, max_mag: float = 500.0) -> MotionCloud:
    """Keep points whose motion magnitude lies in [min_mag, max_mag] mm."""
    if not 0 <= min_mag < max_mag:
        raise ValueError(f"need 0 <= min_mag < max_mag, got [{min_mag}, {max_mag}]")
    mag = cloud.magnitudes
    keep = (mag >= min_mag) & (mag <= max_mag)
    return MotionCloud(cloud.points[keep], cloud.motions[keep], cloud.frame_index)
