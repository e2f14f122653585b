"""Dense 2D optical flow between consecutive frames.

Two backends sit behind one contract:

* ``farneback`` (default): OpenCV's pyramidal polynomial-expansion method,
* ``blockmatch``: an exhaustive integer block-matching search, slow but
  simple enough to serve as an independent oracle in tests.

Frames are float arrays in [0, 1] of shape (H, W); flow fields are float32
arrays of shape (H, W, 2) holding per-pixel (du, dv) displacements from
frame t to t+1, du along columns (x) and dv along rows (y).
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import DimensionMismatchError

_GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class FlowParams:
    backend: str = "farneback"
    levels: int = 3
    pyr_scale: float = 0.5
    winsize: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1
    # blockmatch backend only
    search_radius: int = 10
    block_size: int = 9
    # magnitude cap; None means the image diagonal
    max_flow: float | None = None

    def __post_init__(self):
        if self.backend not in ("farneback", "blockmatch"):
            raise ValueError(f"unknown flow backend {self.backend!r}")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.winsize < 3 or self.winsize % 2 == 0:
            raise ValueError(f"winsize must be odd and >= 3, got {self.winsize}")
        if self.block_size < 3 or self.block_size % 2 == 0:
            raise ValueError(f"block_size must be odd and >= 3, got {self.block_size}")
        if not 0 < self.pyr_scale < 1:
            raise ValueError(f"pyr_scale must be in (0, 1), got {self.pyr_scale}")


def to_gray(rgb_frame: np.ndarray) -> np.ndarray:
    """Convert an 8-bit RGB frame to luminance in [0, 1]."""
    rgb = np.asarray(rgb_frame)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionMismatchError(f"expected (H, W, 3) RGB frame, got {rgb.shape}")
    return (rgb.astype(np.float64) @ _GRAY_WEIGHTS / 255.0).astype(np.float32)


def dense_flow(prev: np.ndarray, next: np.ndarray, params: FlowParams | None = None) -> np.ndarray:
    """Estimate per-pixel displacement from ``prev`` to ``next``.

    Deterministic for fixed inputs and params. Constant-intensity frames
    produce all-zero flow by definition.
    """
    params = params or FlowParams()
    prev = np.asarray(prev, dtype=np.float32)
    next = np.asarray(next, dtype=np.float32)
    if prev.ndim != 2 or next.ndim != 2:
        raise DimensionMismatchError("frames must be 2D grayscale arrays")
    if prev.shape != next.shape:
        raise DimensionMismatchError(f"frame shapes differ: {prev.shape} vs {next.shape}")

    # identical or featureless frames have exactly zero motion by definition;
    # skipping the estimator also avoids its border drift
    if _is_constant(prev) or _is_constant(next) or np.array_equal(prev, next):
        return np.zeros(prev.shape + (2,), dtype=np.float32)

    if params.backend == "farneback":
        flow = _farneback(prev, next, params)
    else:
        flow = _block_match(prev, next, params)

    max_flow = params.max_flow
    if max_flow is None:
        max_flow = float(np.hypot(*prev.shape))
    mag = np.linalg.norm(flow, axis=-1)
    over = mag > max_flow
    if over.any():
        flow[over] *= (max_flow / mag[over])[:, None]
    return flow


def _is_constant(frame: np.ndarray) -> bool:
    return bool((frame == frame.flat[0]).all())


def _farneback(prev: np.ndarray, next: np.ndarray, p: FlowParams) -> np.ndarray:
    prev8 = np.clip(prev * 255.0, 0, 255).astype(np.uint8)
    next8 = np.clip(next * 255.0, 0, 255).astype(np.uint8)
    return cv2.calcOpticalFlowFarneback(
        prev8,
        next8,
        None,
        pyr_scale=p.pyr_scale,
        levels=p.levels,
        winsize=p.winsize,
        iterations=p.iterations,
        poly_n=p.poly_n,
        poly_sigma=p.poly_sigma,
        flags=0,
    )


def _block_match(prev: np.ndarray, next: np.ndarray, p: FlowParams) -> np.ndarray:
    """Exhaustive integer-displacement search minimizing block SSD.

    For each pixel, tries every (du, dv) within the search radius and keeps
    the displacement whose block-summed squared difference between
    prev(x) and next(x + d) is smallest. First minimum wins (fixed scan
    order), so output is deterministic.
    """
    h, w = prev.shape
    r = p.search_radius
    best_cost = np.full((h, w), np.inf, dtype=np.float64)
    best = np.zeros((h, w, 2), dtype=np.float32)
    pad = float(10.0)  # mismatch cost for out-of-frame comparisons
    for dv in range(-r, r + 1):
        for du in range(-r, r + 1):
            shifted = np.full((h, w), pad, dtype=np.float64)
            src_y = slice(max(0, dv), min(h, h + dv))
            src_x = slice(max(0, du), min(w, w + du))
            dst_y = slice(max(0, -dv), min(h, h - dv))
            dst_x = slice(max(0, -du), min(w, w - du))
            shifted[dst_y, dst_x] = next[src_y, src_x]
            diff = (prev - shifted) ** 2
            cost = cv2.boxFilter(diff, -1, (p.block_size, p.block_size), normalize=False)
            better = cost < best_cost
            best_cost[better] = cost[better]
            best[better] = (du, dv)
    return best
