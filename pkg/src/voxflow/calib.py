"""Pinhole camera model and RGB-to-depth pixel registration.

Conventions used throughout the package:

* depth pixels are addressed as ``(u, w)`` with ``u`` the column (x axis)
  and ``w`` the row (y axis); RGB pixels as ``(i, j)`` with ``i`` the
  column and ``j`` the row,
* arrays are stored row-major, i.e. ``depth[w, u]`` and ``rgb[j, i]``,
* all camera-space geometry is in millimeters; raw depth units convert to
  meters via ``depth_scale`` (default 0.001, the Kinect-v2 convention).

Registration from RGB to depth pixels goes through a precomputed lookup
table so that differing RGB/depth resolutions need no resampling at
runtime.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    CalibrationError,
    InvalidDepthError,
    NonPositiveDepthError,
    OutOfBoundsError,
)

LUT_UNMAPPED = -1
_LUT_FILE_SENTINEL = 0xFFFF


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics of a camera (pixel units)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise CalibrationError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise CalibrationError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )


@dataclass(frozen=True)
class Point3:
    """Camera-space point in millimeters."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


def backproject(
    pixel: tuple[float, float],
    depth_value: int,
    intr: Intrinsics,
    depth_scale: float = 0.001,
) -> Point3:
    """Back-project a depth pixel to its camera-space point.

    ``depth_value`` is in raw sensor units; the returned point is in
    millimeters. Raises :class:`InvalidDepthError` for the sensor's
    invalid code (0) so callers can skip the pixel.
    """
    u, w = pixel
    if depth_value == 0:
        raise InvalidDepthError(f"invalid depth at pixel ({u}, {w})")
    if not (0 <= u < intr.width and 0 <= w < intr.height):
        raise OutOfBoundsError(f"pixel ({u}, {w}) outside {intr.width}x{intr.height} depth image")
    d_mm = float(depth_value) * depth_scale * 1000.0
    return Point3((u - intr.cx) * d_mm / intr.fx, (w - intr.cy) * d_mm / intr.fy, d_mm)


def project(p: Point3, intr: Intrinsics) -> tuple[float, float]:
    """Project a camera-space point to continuous pixel coordinates ``(u, w)``."""
    if p.z <= 0:
        raise NonPositiveDepthError(f"cannot project point with z={p.z}")
    return (p.x * intr.fx / p.z + intr.cx, p.y * intr.fy / p.z + intr.cy)


def backproject_array(
    u: np.ndarray, w: np.ndarray, depth_mm: np.ndarray, intr: Intrinsics
) -> np.ndarray:
    """Vectorized back-projection of pixel coordinates with depths already in mm.

    Returns an (N, 3) float64 array. Validity filtering is the caller's job.
    """
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    d = np.asarray(depth_mm, dtype=np.float64)
    out = np.empty(d.shape + (3,), dtype=np.float64)
    out[..., 0] = (u - intr.cx) * d / intr.fx
    out[..., 1] = (w - intr.cy) * d / intr.fy
    out[..., 2] = d
    return out


@dataclass(frozen=True)
class Registration:
    """Row-major flattened view of a rig's LUT plus derived lookup indices."""

    u: np.ndarray  # (N,) int32 depth column per RGB pixel
    w: np.ndarray  # (N,) int32 depth row per RGB pixel
    mapped: np.ndarray  # (N,) bool
    lin: np.ndarray  # (N,) int64 linear depth index (0 where unmapped)
    is_identity: bool = False  # co-located cameras at equal resolution


@dataclass(frozen=True)
class CameraRig:
    """Depth camera intrinsics plus the RGB-to-depth registration table.

    ``lut`` has shape (rgb_height, rgb_width, 2) with entries ``(u, w)`` in
    depth-pixel coordinates, or :data:`LUT_UNMAPPED` in both slots for RGB
    pixels with no depth correspondence. Immutable after construction and
    safe for concurrent reads.
    """

    depth_intrinsics: Intrinsics
    lut: np.ndarray = field(repr=False)
    depth_scale: float = 0.001

    def __post_init__(self):
        lut = np.asarray(self.lut)
        if lut.ndim != 3 or lut.shape[2] != 2:
            raise CalibrationError(f"LUT must have shape (H, W, 2), got {lut.shape}")
        if self.depth_scale <= 0:
            raise CalibrationError(f"depth_scale must be positive, got {self.depth_scale}")
        mapped = lut[..., 0] != LUT_UNMAPPED
        intr = self.depth_intrinsics
        us, ws = lut[..., 0][mapped], lut[..., 1][mapped]
        if mapped.any() and (
            us.min() < 0 or us.max() >= intr.width or ws.min() < 0 or ws.max() >= intr.height
        ):
            raise CalibrationError("LUT maps RGB pixels outside the depth image")
        lut = lut.astype(np.int32, copy=False)
        lut.setflags(write=False)
        object.__setattr__(self, "lut", lut)

    @property
    def rgb_width(self) -> int:
        return self.lut.shape[1]

    @property
    def rgb_height(self) -> int:
        return self.lut.shape[0]

    @cached_property
    def registration(self) -> "Registration":
        """Flattened registration arrays, precomputed once per rig."""
        u = np.ascontiguousarray(self.lut[..., 0].ravel())
        w = np.ascontiguousarray(self.lut[..., 1].ravel())
        mapped = u != LUT_UNMAPPED
        lin = np.where(mapped, w.astype(np.int64) * self.depth_intrinsics.width + u, 0)
        intr = self.depth_intrinsics
        is_identity = (
            (self.rgb_height, self.rgb_width) == (intr.height, intr.width)
            and bool(mapped.all())
            and bool((lin == np.arange(lin.size)).all())
        )
        return Registration(u=u, w=w, mapped=mapped, lin=lin, is_identity=is_identity)

    @classmethod
    def identity(cls, intr: Intrinsics, depth_scale: float = 0.001) -> "CameraRig":
        """Co-located RGB and depth cameras at equal resolution."""
        us, ws = np.meshgrid(np.arange(intr.width), np.arange(intr.height))
        return cls(intr, np.stack([us, ws], axis=-1), depth_scale)

    @classmethod
    def shifted(
        cls,
        intr: Intrinsics,
        du: int,
        dw: int,
        rgb_size: tuple[int, int] | None = None,
        depth_scale: float = 0.001,
    ) -> "CameraRig":
        """Affine registration: RGB pixel (i, j) maps to depth pixel (i+du, j+dw)."""
        rgb_w, rgb_h = rgb_size if rgb_size is not None else (intr.width, intr.height)
        ii, jj = np.meshgrid(np.arange(rgb_w), np.arange(rgb_h))
        us, ws = ii + du, jj + dw
        lut = np.stack([us, ws], axis=-1).astype(np.int32)
        bad = (us < 0) | (us >= intr.width) | (ws < 0) | (ws >= intr.height)
        lut[bad] = LUT_UNMAPPED
        return cls(intr, lut, depth_scale)


def register_rgb_pixel(rgb_pixel: tuple[int, int], rig: CameraRig) -> tuple[int, int] | None:
    """Map an RGB pixel (i, j) to its depth pixel (u, w), or None if unmapped."""
    i, j = rgb_pixel
    if not (0 <= i < rig.rgb_width and 0 <= j < rig.rgb_height):
        raise OutOfBoundsError(
            f"RGB pixel ({i}, {j}) outside {rig.rgb_width}x{rig.rgb_height} frame"
        )
    u, w = rig.lut[j, i]
    if u == LUT_UNMAPPED:
        return None
    return int(u), int(w)


def write_lut_file(path: str | Path, lut: np.ndarray) -> None:
    """Write a LUT as little-endian u16 (u, w) pairs, 0xFFFF,0xFFFF = unmapped."""
    out = np.asarray(lut).astype(np.int64).copy()
    out[out[..., 0] == LUT_UNMAPPED] = _LUT_FILE_SENTINEL
    if out.max() >= _LUT_FILE_SENTINEL + 1 or out.min() < 0:
        raise CalibrationError("LUT entries do not fit the 16-bit file format")
    Path(path).write_bytes(out.astype("<u2").tobytes())


def read_lut_file(path: str | Path, rgb_size: tuple[int, int]) -> np.ndarray:
    """Read a binary LUT written by :func:`write_lut_file`."""
    rgb_w, rgb_h = rgb_size
    raw = np.frombuffer(Path(path).read_bytes(), dtype="<u2")
    if raw.size != rgb_w * rgb_h * 2:
        raise CalibrationError(
            f"LUT file holds {raw.size} u16 values, expected {rgb_w * rgb_h * 2}"
        )
    lut = raw.reshape(rgb_h, rgb_w, 2).astype(np.int32)
    lut[lut[..., 0] == _LUT_FILE_SENTINEL] = LUT_UNMAPPED
    return lut


def load_calibration(path: str | Path) -> CameraRig:
    """Load a calibration file (JSON) into a CameraRig.

    Schema::

        {
          "depth_intrinsics": {"fx", "fy", "cx", "cy", "width", "height"},
          "depth_scale": 0.001,
          "rgb_size": [width, height],          # optional, defaults to depth size
          "lut": "identity" | {"du": 0, "dw": 0} | "relative/path/to/lut.bin"
        }
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CalibrationError(f"cannot read calibration file {path}: {exc}") from exc
    try:
        di = doc["depth_intrinsics"]
        intr = Intrinsics(
            fx=float(di["fx"]),
            fy=float(di["fy"]),
            cx=float(di["cx"]),
            cy=float(di["cy"]),
            width=int(di["width"]),
            height=int(di["height"]),
        )
        depth_scale = float(doc.get("depth_scale", 0.001))
        lut_spec = doc.get("lut", "identity")
        rgb_size = tuple(doc["rgb_size"]) if "rgb_size" in doc else None
    except (KeyError, TypeError, ValueError) as exc:
        raise CalibrationError(f"malformed calibration file {path}: {exc}") from exc

    if lut_spec == "identity":
        if rgb_size is not None and tuple(rgb_size) != (intr.width, intr.height):
            raise CalibrationError("identity LUT requires rgb_size equal to depth size")
        return CameraRig.identity(intr, depth_scale)
    if isinstance(lut_spec, dict):
        return CameraRig.shifted(
            intr, int(lut_spec["du"]), int(lut_spec["dw"]), rgb_size, depth_scale
        )
    if rgb_size is None:
        raise CalibrationError("binary LUT requires an explicit rgb_size")
    lut = read_lut_file(path.parent / lut_spec, rgb_size)
    return CameraRig(intr, lut, depth_scale)


def save_calibration(path: str | Path, rig: CameraRig, lut_spec="identity") -> None:
    """Write a calibration file for a rig; only declarative LUT specs supported."""
    intr = rig.depth_intrinsics
    doc = {
        "depth_intrinsics": {
            "fx": intr.fx,
            "fy": intr.fy,
            "cx": intr.cx,
            "cy": intr.cy,
            "width": intr.width,
            "height": intr.height,
        },
        "depth_scale": rig.depth_scale,
        "rgb_size": [rig.rgb_width, rig.rgb_height],
        "lut": lut_spec,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
