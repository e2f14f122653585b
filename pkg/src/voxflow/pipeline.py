"""Video-to-tensor orchestration and scikit-learn style estimators.

The transform at the heart of the package is per-video: a voxel grid is
fitted to the video's motion clouds, then each snippet's frame pairs are
voxelized against that grid. Two estimators expose this with the familiar
fit/transform surface so the representation composes with sklearn
pipelines; the functional entry points underneath are what the CLI uses.

Frame pairs fan out to a bounded thread pool and are merged in pair-index
order, so the output is byte-identical for any worker count. OpenCV's
internal threading is pinned to one thread while building for the same
reason.
"""

from __future__ import annotations

import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from threading import Lock

import cv2
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import store
from .augment import AugmentParams, apply_params, sample_params
from .calib import CameraRig, load_calibration
from .errors import VoxflowError
from .flow2d import FlowParams, dense_flow, to_gray
from .lift3d import MotionCloud, filter_cloud, lift
from .sampler import SnippetPlan, plan_snippets
from .voxelizer import SnippetTensor, assemble_snippet, fit_grid, voxelize_pair


@dataclass
class BuildConfig:
    """Everything cmd_build needs; validated before any work starts."""

    grid_dims: tuple[int, int, int] = (54, 54, 54)
    snippet_count: int = 10
    snippet_len: int = 5
    percentile: float = 0.99
    flow: FlowParams = field(default_factory=FlowParams)
    filter_enabled: bool = True
    min_motion_mm: float = 0.5
    max_motion_mm: float = 500.0
    augment: bool = False
    max_rotation_deg: float = 30.0
    max_translation_frac: float = 0.10
    pad_last: bool = False
    seed: int = 0
    workers: int = 1

    def validate(self) -> None:
        if any(d < 1 for d in self.grid_dims) or len(self.grid_dims) != 3:
            raise ValueError(f"grid_dims must be three positive ints, got {self.grid_dims}")
        if self.snippet_count < 1 or self.snippet_len < 2:
            raise ValueError("need snippet_count >= 1 and snippet_len >= 2")
        if not 0.5 < self.percentile <= 1.0:
            raise ValueError(f"percentile must be in (0.5, 1], got {self.percentile}")
        if not 0 <= self.min_motion_mm < self.max_motion_mm:
            raise ValueError("need 0 <= min_motion_mm < max_motion_mm")
        if self.max_rotation_deg < 0 or self.max_translation_frac < 0:
            raise ValueError("augmentation bounds must be nonnegative")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


def video_augment_seed(base_seed: int, video_id: str) -> tuple[int, int]:
    """Stable per-video augmentation seed, independent of scheduling."""
    return (base_seed, zlib.crc32(video_id.encode("utf-8")))


@dataclass
class PairResult:
    """Per-frame-pair lift output, with raw geometry reduced to a sample.

    Motion magnitude is invariant under the augmentation transforms, so
    filtering happens here, before augmentation; the stride-sampled raw
    points are what grid fitting needs from the full cloud.
    """

    cloud: MotionCloud  # magnitude-filtered (or raw when filtering is off)
    fit_points: np.ndarray  # (M, 3) stride sample of the raw geometry
    raw_points: int


FIT_SAMPLE_STRIDE = 8


def compute_pair_clouds(
    video,
    rig: CameraRig,
    pairs: list[tuple[int, int]],
    flow_params: FlowParams,
    workers: int = 1,
    filter_bounds: tuple[float, float] | None = (0.5, 500.0),
) -> dict[tuple[int, int], PairResult]:
    """Flow + lift (+ magnitude filter) per frame pair over a thread pool.

    Results are keyed by pair and independent of worker count.
    """
    cv2.setNumThreads(1)  # determinism across worker counts
    grays: dict[int, np.ndarray] = {}
    gray_lock = Lock()

    def gray(t: int) -> np.ndarray:
        with gray_lock:
            cached = grays.get(t)
        if cached is not None:
            return cached
        g = to_gray(video.rgb(t))
        with gray_lock:
            grays.setdefault(t, g)
        return g

    def one(pair: tuple[int, int]) -> PairResult:
        a, b = pair
        if a == b:  # padded pair from a short video: zero motion by definition
            empty = MotionCloud(np.empty((0, 3)), np.empty((0, 3)), a)
            return PairResult(empty, np.empty((0, 3)), 0)
        flow = dense_flow(gray(a), gray(b), flow_params)
        cloud = lift(flow, video.depth(a), video.depth(b), rig, a)
        sample = cloud.points[::FIT_SAMPLE_STRIDE].copy()
        raw = len(cloud)
        if filter_bounds is not None:
            cloud = filter_cloud(cloud, *filter_bounds)
        return PairResult(cloud, sample, raw)

    unique = sorted(set(pairs))
    if workers <= 1:
        results = [one(p) for p in unique]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, unique))
    return dict(zip(unique, results))


class MotionGridVoxelizer(BaseEstimator, TransformerMixin):
    """Fit a voxel grid to motion clouds, then voxelize clouds against it.

    fit(X): X is a sequence of MotionCloud; learns ``grid_``.
    transform(X): returns one VoxelizedPair per cloud on the fitted grid.
    """

    def __init__(self, dims=(54, 54, 54), percentile=0.99):
        self.dims = dims
        self.percentile = percentile

    def fit(self, X, y=None):
        self.grid_ = fit_grid(list(X), tuple(self.dims), self.percentile)
        return self

    def transform(self, X):
        if not hasattr(self, "grid_"):
            raise NotFittedError("MotionGridVoxelizer must be fitted before transform")
        return [voxelize_pair(cloud, self.grid_) for cloud in X]


class SnippetVoxelPipeline(BaseEstimator):
    """Full video -> snippet-tensor transform with sklearn parameter plumbing.

    fit(video) estimates the per-video grid (and draws augmentation
    parameters when enabled); transform(video) yields the snippet tensors.
    ``video`` is anything with ``__len__``, ``rgb(t)`` and ``depth(t)``.
    """

    def __init__(
        self,
        rig: CameraRig | None = None,
        grid_dims=(54, 54, 54),
        snippet_count=10,
        snippet_len=5,
        percentile=0.99,
        flow: FlowParams | None = None,
        filter_enabled=True,
        min_motion_mm=0.5,
        max_motion_mm=500.0,
        augment=False,
        max_rotation_deg=30.0,
        max_translation_frac=0.10,
        pad_last=False,
        seed=0,
        workers=1,
        video_id="video",
    ):
        self.rig = rig
        self.grid_dims = grid_dims
        self.snippet_count = snippet_count
        self.snippet_len = snippet_len
        self.percentile = percentile
        self.flow = flow
        self.filter_enabled = filter_enabled
        self.min_motion_mm = min_motion_mm
        self.max_motion_mm = max_motion_mm
        self.augment = augment
        self.max_rotation_deg = max_rotation_deg
        self.max_translation_frac = max_translation_frac
        self.pad_last = pad_last
        self.seed = seed
        self.workers = workers
        self.video_id = video_id

    def _filter_bounds(self):
        return (self.min_motion_mm, self.max_motion_mm) if self.filter_enabled else None

    def fit(self, video, y=None):
        if self.rig is None:
            raise ValueError("a CameraRig is required")
        flow_params = self.flow or FlowParams()
        self.plan_ = plan_snippets(len(video), self.snippet_count, self.snippet_len)
        pairs = [p for k in range(self.snippet_count) for p in self.plan_.frame_pairs(k)]
        self.clouds_ = compute_pair_clouds(
            video, self.rig, pairs, flow_params, self.workers, self._filter_bounds()
        )
        self.grid_ = fit_grid(
            [r.fit_points for r in self.clouds_.values()],
            tuple(self.grid_dims),
            self.percentile,
        )
        if self.augment:
            self.aug_params_ = sample_params(
                self.max_translation_frac,
                self.max_rotation_deg,
                seed=video_augment_seed(self.seed, self.video_id),
            )
        else:
            self.aug_params_ = AugmentParams()
        self._fitted_video = video
        return self

    def transform(self, video=None):
        if not hasattr(self, "grid_"):
            raise NotFittedError("SnippetVoxelPipeline must be fitted before transform")
        if video is None or video is self._fitted_video:
            plan, clouds = self.plan_, self.clouds_
        else:
            flow_params = self.flow or FlowParams()
            plan = plan_snippets(len(video), self.snippet_count, self.snippet_len)
            pairs = [p for k in range(self.snippet_count) for p in plan.frame_pairs(k)]
            clouds = compute_pair_clouds(
                video, self.rig, pairs, flow_params, self.workers, self._filter_bounds()
            )

        prepared = {}
        for pair, result in clouds.items():
            cloud = apply_params(result.cloud, self.aug_params_, self.grid_)
            prepared[pair] = voxelize_pair(cloud, self.grid_)
        return [
            assemble_snippet([prepared[p] for p in plan.frame_pairs(k)], self.pad_last)
            for k in range(plan.snippet_count)
        ]

    def fit_transform(self, video, y=None):
        return self.fit(video).transform()


def build_video(video, rig: CameraRig, config: BuildConfig, video_id="video"):
    """Build one video's snippet tensors; returns (tensors, aug params, stats)."""
    config.validate()
    t0 = time.perf_counter()
    est = SnippetVoxelPipeline(
        rig=rig,
        grid_dims=config.grid_dims,
        snippet_count=config.snippet_count,
        snippet_len=config.snippet_len,
        percentile=config.percentile,
        flow=config.flow,
        filter_enabled=config.filter_enabled,
        min_motion_mm=config.min_motion_mm,
        max_motion_mm=config.max_motion_mm,
        augment=config.augment,
        max_rotation_deg=config.max_rotation_deg,
        max_translation_frac=config.max_translation_frac,
        pad_last=config.pad_last,
        seed=config.seed,
        workers=config.workers,
        video_id=video_id,
    )
    tensors = est.fit_transform(video)
    occ = [float((t.occupancy > 0).mean()) for t in tensors if t.occupancy is not None]
    stats = {
        "frames": len(video),
        "pairs": len(est.clouds_),
        "points_raw": int(sum(r.raw_points for r in est.clouds_.values())),
        "points_kept": int(sum(len(r.cloud) for r in est.clouds_.values())),
        "mean_occupancy": float(np.mean(occ)) if occ else 0.0,
        "seconds": time.perf_counter() - t0,
    }
    return tensors, est.aug_params_, stats


def discover_videos(root: str | Path) -> list[tuple[str, Path]]:
    """Corpus layout: one subdirectory per video holding rgb/ and depth/."""
    root = Path(root)
    videos = []
    for sub in sorted(root.iterdir()):
        if sub.is_dir() and (sub / "rgb").is_dir() and (sub / "depth").is_dir():
            videos.append((sub.name, sub))
    return videos


def build_corpus(root: str | Path, calib_path: str | Path, out_dir: str | Path,
                 config: BuildConfig) -> dict:
    """Run cmd_build over a corpus; per-video failures do not stop the batch."""
    config.validate()
    rig = load_calibration(calib_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    videos = discover_videos(root)
    summary = {"videos": {}, "records": 0, "failed": 0}
    for video_id, video_dir in videos:
        try:
            video = store.load_video(video_dir / "rgb", video_dir / "depth")
            tensors, aug, stats = build_video(video, rig, config, video_id)
            for k, tensor in enumerate(tensors):
                meta = store.VxfMeta(video_id, k, 0, aug.as_header())
                store.write_vxf_file(out_dir / f"{video_id}_k{k:02d}.vxf", tensor, meta)
            stats["status"] = "ok"
            summary["records"] += len(tensors)
        except (VoxflowError, ValueError, OSError) as exc:
            stats = {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
            summary["failed"] += 1
        summary["videos"][video_id] = stats
    return summary


def run_bench(config: BuildConfig, frames: int = 30, image_size=(512, 424), seed: int = 0) -> dict:
    """Time each pipeline stage on a synthetic video, stage-by-stage.

    Stages are separated by barriers so their wall times add up to the
    measured total; pairs/sec uses the total.
    """
    from . import synth  # local import: synth depends on most of the package

    config.validate()
    if frames < 2:
        return {"frame_pairs": 0, "pairs_per_sec": 0.0, "stages_ms": {}, "wall_ms": 0.0}
    cv2.setNumThreads(1)
    camera = synth._sample_camera(image_size)
    rng = np.random.default_rng(seed)
    scene = synth._class_scene(0, frames, camera, 35.0, rng)
    result = synth.render(scene)
    video = store.ArrayVideo(result.rgb, result.depth)
    pairs = [(t, t + 1) for t in range(frames - 1)]
    flow_params = config.flow
    rig = result.rig

    def pool_map(fn, items):
        if config.workers <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(fn, items))

    grays = [to_gray(result.rgb[t]) for t in range(frames)]
    stage_ms = {}

    t0 = time.perf_counter()
    flows = pool_map(lambda p: dense_flow(grays[p[0]], grays[p[1]], flow_params), pairs)
    stage_ms["flow"] = (time.perf_counter() - t0) * 1000

    def lift_one(ip):
        i, (a, b) = ip
        cloud = lift(flows[i], result.depth[a], result.depth[b], rig, a)
        sample = cloud.points[::FIT_SAMPLE_STRIDE].copy()
        if config.filter_enabled:
            cloud = filter_cloud(cloud, config.min_motion_mm, config.max_motion_mm)
        return cloud, sample

    t1 = time.perf_counter()
    lifted = pool_map(lift_one, list(enumerate(pairs)))
    stage_ms["lift"] = (time.perf_counter() - t1) * 1000

    t2 = time.perf_counter()
    grid = fit_grid([s for _, s in lifted], tuple(config.grid_dims), config.percentile)
    voxed = pool_map(lambda cs: voxelize_pair(cs[0], grid), lifted)
    vox_by_pair = dict(zip(pairs, voxed))
    empty = MotionCloud(np.empty((0, 3)), np.empty((0, 3)))
    stage_ms["voxelize"] = (time.perf_counter() - t2) * 1000

    t3 = time.perf_counter()
    plan = plan_snippets(frames, config.snippet_count, config.snippet_len)
    blobs = []
    for k in range(plan.snippet_count):
        voxed_k = [
            vox_by_pair.setdefault(p, voxelize_pair(empty, grid))
            for p in plan.frame_pairs(k)
        ]
        blobs.append(store.write_vxf(assemble_snippet(voxed_k, config.pad_last), store.VxfMeta("bench", k)))
    stage_ms["write"] = (time.perf_counter() - t3) * 1000

    wall_ms = (time.perf_counter() - t0) * 1000
    return {
        "frame_pairs": len(pairs),
        "image_size": list(image_size),
        "workers": config.workers,
        "cpu_count": os.cpu_count(),
        "stages_ms": {k: round(v, 2) for k, v in stage_ms.items()},
        "wall_ms": round(wall_ms, 2),
        "pairs_per_sec": round(len(pairs) / (wall_ms / 1000.0), 2),
        "bytes_written": sum(len(b) for b in blobs),
    }
