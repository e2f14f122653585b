"""Out-of-plane augmentation of motion clouds.

Rotations are about the vertical (+y) axis through a pivot, applied to
point positions and, without the pivot, to motion vectors; translations
shift positions only. Parameters are drawn once per video so every snippet
of a video sees the same transform. Train-time only: the pipeline applies
these only when augmentation is switched on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lift3d import MotionCloud
from .voxelizer import GridSpec


@dataclass(frozen=True)
class AugmentParams:
    """A single draw: per-axis translation fractions and a rotation angle."""

    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation_deg: float = 0.0
    seed: int | None = None

    @property
    def is_identity(self) -> bool:
        return self.rotation_deg == 0.0 and all(t == 0.0 for t in self.translation)

    def as_header(self) -> tuple[float, float, float, float]:
        return (*self.translation, self.rotation_deg)


def sample_params(
    max_translation_frac: float = 0.10,
    max_rotation_deg: float = 30.0,
    seed: int | None = None,
) -> AugmentParams:
    """Draw uniform translation fractions and rotation angle, reproducibly."""
    if max_translation_frac < 0 or max_rotation_deg < 0:
        raise ValueError("augmentation bounds must be nonnegative")
    rng = np.random.default_rng(seed)
    translation = tuple(rng.uniform(-max_translation_frac, max_translation_frac, 3))
    rotation = float(rng.uniform(-max_rotation_deg, max_rotation_deg))
    if max_translation_frac == 0:
        translation = (0.0, 0.0, 0.0)
    if max_rotation_deg == 0:
        rotation = 0.0
    return AugmentParams(translation, rotation, seed)


def rotation_about_y(theta_deg: float) -> np.ndarray:
    """Right-handed rotation matrix about the +y axis."""
    t = np.deg2rad(theta_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotate_cloud(cloud: MotionCloud, theta_deg: float, pivot) -> MotionCloud:
    """Rotate positions about the vertical axis through ``pivot``; rotate
    motion vectors by the same matrix (direction only, no pivot)."""
    if theta_deg == 0.0:
        return cloud
    pivot = np.asarray(pivot, dtype=np.float64).reshape(3)
    rot = rotation_about_y(theta_deg)
    points = (cloud.points - pivot) @ rot.T + pivot
    motions = cloud.motions @ rot.T
    return MotionCloud(points, motions, cloud.frame_index)


def translate_cloud(cloud: MotionCloud, offset) -> MotionCloud:
    """Shift positions by ``offset`` (mm); motion vectors are unchanged."""
    offset = np.asarray(offset, dtype=np.float64).reshape(3)
    if not offset.any():
        return cloud
    return MotionCloud(cloud.points + offset, cloud.motions.copy(), cloud.frame_index)


def apply_params(cloud: MotionCloud, params: AugmentParams, spec: GridSpec) -> MotionCloud:
    """Apply a draw to a cloud: rotate about the grid center, then translate
    by the fraction of each axis's grid extent."""
    if params.is_identity:
        return cloud
    cloud = rotate_cloud(cloud, params.rotation_deg, spec.center)
    extent = np.array(spec.bounds_max) - np.array(spec.bounds_min)
    return translate_cloud(cloud, np.array(params.translation) * extent)
