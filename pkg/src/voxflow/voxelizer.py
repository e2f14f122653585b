"""Voxelization of motion clouds into snippet tensors.

A per-video grid is fitted once from the video's point coordinates so all
of its snippets share one frame of reference. Each frame pair's cloud
becomes three motion planes (dx, dy, dz in voxel units, averaged per
voxel) plus an occupancy count; a snippet stacks its pairs' planes along
the channel axis.

Voxel intervals are half-open [min, max) with floor indexing: a point
exactly at the upper bound is dropped. Accumulation happens in a canonical
order (sorted by voxel index, then coordinates), so the output is
bit-identical under any permutation of input points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EmptyInputError, SpecMismatchError
from .lift3d import MotionCloud

# half-extent floor (mm) so degenerate axes (e.g. a fronto-parallel plane's
# depth) still produce a usable voxel pitch
_MIN_PAD_MM = 0.5

# quantile fitting subsamples beyond this many points
_QUANTILE_POINT_CAP = 400_000


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned voxel grid over a camera-space box (mm)."""

    dims: tuple[int, int, int]
    bounds_min: tuple[float, float, float]
    bounds_max: tuple[float, float, float]

    def __post_init__(self):
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be three positive ints, got {self.dims}")
        if any(hi <= lo for lo, hi in zip(self.bounds_min, self.bounds_max)):
            raise ValueError(
                f"bounds_max must exceed bounds_min, got {self.bounds_min}..{self.bounds_max}"
            )
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "bounds_min", tuple(float(v) for v in self.bounds_min))
        object.__setattr__(self, "bounds_max", tuple(float(v) for v in self.bounds_max))

    @property
    def scale(self) -> np.ndarray:
        """Millimeters per voxel along each axis."""
        lo = np.array(self.bounds_min)
        hi = np.array(self.bounds_max)
        return (hi - lo) / np.array(self.dims, dtype=np.float64)

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.bounds_min) + np.array(self.bounds_max)) / 2.0

    def voxel_centers(self, indices: np.ndarray) -> np.ndarray:
        """Camera-space centers (mm) of voxels given (N, 3) integer indices."""
        return np.array(self.bounds_min) + (np.asarray(indices) + 0.5) * self.scale


@dataclass
class VoxelizedPair:
    """One frame pair voxelized: 3 motion planes plus occupancy counts."""

    planes: np.ndarray  # (3, X, Y, Z) float32, voxel units
    occupancy: np.ndarray  # (X, Y, Z) int32
    spec: GridSpec


@dataclass
class SnippetTensor:
    """Stacked motion planes of one snippet over a shared grid."""

    planes: np.ndarray  # (3 * num_pairs, X, Y, Z) float32
    occupancy: np.ndarray | None  # (num_pairs, X, Y, Z) int32; None when decoded
    spec: GridSpec

    @property
    def channels(self) -> int:
        return self.planes.shape[0]

    @property
    def num_pairs(self) -> int:
        return self.channels // 3


def fit_grid(
    clouds,
    dims: tuple[int, int, int] = (54, 54, 54),
    percentile: float = 0.99,
) -> GridSpec:
    """Fit grid bounds to the quantile box of all cloud points, +5% per side.

    One GridSpec per video: pass every cloud the video produced so its
    snippets share a stable frame. Accepts MotionClouds or bare (N, 3)
    point arrays.
    """
    if not 0.5 < percentile <= 1.0:
        raise ValueError(f"percentile must be in (0.5, 1], got {percentile}")
    arrays = [c.points if isinstance(c, MotionCloud) else np.asarray(c) for c in clouds]
    nonempty = [p.reshape(-1, 3) for p in arrays if p.size]
    if not nonempty:
        raise EmptyInputError("cannot fit a grid to empty clouds")
    if percentile == 1.0:
        lo = np.min([p.min(axis=0) for p in nonempty], axis=0)
        hi = np.max([p.max(axis=0) for p in nonempty], axis=0)
    else:
        total = sum(p.shape[0] for p in nonempty)
        # quantile ranks are stable under thinning; the 5% pad dwarfs the
        # estimation error, and a fixed stride keeps the result deterministic
        stride = max(1, -(-total // _QUANTILE_POINT_CAP))
        pts = np.concatenate([p[::stride] for p in nonempty], axis=0)
        lo, hi = _column_quantiles(pts, 1.0 - percentile, percentile)
    pad = np.maximum(0.05 * (hi - lo), _MIN_PAD_MM)
    return GridSpec(tuple(dims), tuple(lo - pad), tuple(hi + pad))


def _column_quantiles(pts: np.ndarray, q_lo: float, q_hi: float):
    """Per-axis linear-interpolation quantiles via partial sort.

    Matches np.quantile's "linear" method exactly but runs in O(n).
    """
    n = pts.shape[0]
    ranks = []
    for q in (q_lo, q_hi):
        pos = q * (n - 1)
        ranks += [int(np.floor(pos)), int(np.ceil(pos))]
    kth = sorted(set(ranks))
    lo = np.empty(3)
    hi = np.empty(3)
    for axis in range(3):
        part = np.partition(np.ascontiguousarray(pts[:, axis]), kth)
        for q, out in ((q_lo, lo), (q_hi, hi)):
            pos = q * (n - 1)
            below, above = int(np.floor(pos)), int(np.ceil(pos))
            out[axis] = part[below] + (part[above] - part[below]) * (pos - below)
    return lo, hi


def voxelize_pair(cloud: MotionCloud, spec: GridSpec) -> VoxelizedPair:
    """Average each voxel's motion vectors, rescaled to voxel units.

    Points outside the grid bounds are dropped; empty voxels hold zero.
    """
    dims = np.array(spec.dims)
    planes = np.zeros((3,) + spec.dims, dtype=np.float32)
    occupancy = np.zeros(spec.dims, dtype=np.int32)
    if len(cloud) == 0:
        return VoxelizedPair(planes, occupancy, spec)

    lo = np.array(spec.bounds_min)
    hi = np.array(spec.bounds_max)
    scale = spec.scale
    idx = np.floor((cloud.points - lo) / scale).astype(np.int64)
    inb = ((idx >= 0) & (idx < dims)).all(axis=1) & (cloud.points < hi).all(axis=1)
    idx = idx[inb]
    pts = cloud.points[inb]
    mot = cloud.motions[inb]
    if idx.shape[0] == 0:
        return VoxelizedPair(planes, occupancy, spec)

    lin = (idx[:, 0] * dims[1] + idx[:, 1]) * dims[2] + idx[:, 2]
    # canonical accumulation order: voxel index first, then coordinates,
    # then motion, making the sums independent of input point order
    order = np.lexsort(
        (mot[:, 2], mot[:, 1], mot[:, 0], pts[:, 2], pts[:, 1], pts[:, 0], lin)
    )
    lin, mot = lin[order], mot[order]

    nvox = int(dims.prod())
    sums = np.zeros((nvox, 3), dtype=np.float64)
    np.add.at(sums, lin, mot)
    counts = np.zeros(nvox, dtype=np.int64)
    np.add.at(counts, lin, 1)

    filled = counts > 0
    mean = np.zeros_like(sums)
    mean[filled] = sums[filled] / counts[filled, None] / scale[None, :]
    planes = mean.T.reshape((3,) + spec.dims).astype(np.float32)
    occupancy = counts.reshape(spec.dims).astype(np.int32)
    return VoxelizedPair(planes, occupancy, spec)


def assemble_snippet(pairs: list[VoxelizedPair], pad_last: bool = False) -> SnippetTensor:
    """Stack voxelized pairs into one snippet tensor, channels pair-major.

    ``pad_last`` replicates the final pair once, raising the channel count
    from 3*(L-1) to 3*L for consumers expecting one plane set per frame.
    """
    if not pairs:
        raise EmptyInputError("cannot assemble a snippet from zero pairs")
    spec = pairs[0].spec
    if any(p.spec != spec for p in pairs[1:]):
        raise SpecMismatchError("voxelized pairs were built against different grids")
    if pad_last:
        pairs = list(pairs) + [pairs[-1]]
    planes = np.concatenate([p.planes for p in pairs], axis=0)
    occupancy = np.stack([p.occupancy for p in pairs], axis=0)
    return SnippetTensor(planes, occupancy, spec)
