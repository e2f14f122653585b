"""Synthetic RGB-D scenes with analytic ground-truth motion.

Scenes are built from textured rigid primitives (fronto-parallel planes
and axis-aligned boxes) following per-frame rigid translations, rendered
with a z-buffer into RGB and raw-unit depth frames. Because every
surface point's motion is known exactly, the renderer doubles as the
independent oracle for the whole geometry pipeline.

Textures are hash-based value noise evaluated in object-local
coordinates, so they travel with the object and give the flow estimator
gradient information everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import store
from .augment import AugmentParams, rotate_cloud, rotation_about_y, sample_params, apply_params
from .calib import CameraRig, Intrinsics, backproject_array, save_calibration
from .errors import EmptySceneError
from .flow2d import FlowParams, dense_flow, to_gray
from .lift3d import MotionCloud, filter_cloud, lift
from .sampler import plan_snippets
from .voxelizer import assemble_snippet, fit_grid, voxelize_pair

DEFAULT_CAMERA = Intrinsics(fx=365.0, fy=365.0, cx=256.0, cy=212.0, width=512, height=424)

OWNER_INVALID = -2
OWNER_BACKGROUND = -1


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic lattice hash to [0, 1); relies on uint64 wraparound."""
    with np.errstate(over="ignore"):
        h = (
            ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
            ^ iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
            ^ np.uint64((seed & 0xFFFFFFFF) * 0x165667B19E3779F9 & 0xFFFFFFFFFFFFFFFF)
        )
        h ^= h >> np.uint64(33)
        h *= np.uint64(0xFF51AFD7ED558CCD)
        h ^= h >> np.uint64(33)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(xs: np.ndarray, ys: np.ndarray, seed: int, octaves: int = 2) -> np.ndarray:
    """Smooth seeded noise in [0, 1]; xs/ys are in lattice-cell units."""
    total = np.zeros_like(np.asarray(xs, dtype=np.float64))
    amp, norm = 1.0, 0.0
    for octave in range(octaves):
        fx = np.asarray(xs, dtype=np.float64) * (2**octave)
        fy = np.asarray(ys, dtype=np.float64) * (2**octave)
        ix, iy = np.floor(fx).astype(np.int64), np.floor(fy).astype(np.int64)
        tx, ty = fx - ix, fy - iy
        tx = tx * tx * (3 - 2 * tx)
        ty = ty * ty * (3 - 2 * ty)
        oseed = seed * 31 + octave
        v00 = _hash01(ix, iy, oseed)
        v10 = _hash01(ix + 1, iy, oseed)
        v01 = _hash01(ix, iy + 1, oseed)
        v11 = _hash01(ix + 1, iy + 1, oseed)
        total += amp * ((v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty)
        norm += amp
        amp *= 0.5
    return total / norm


def linear_path(center0, velocity, frames: int) -> np.ndarray:
    """Per-frame centers for constant velocity (mm/frame)."""
    c0 = np.asarray(center0, dtype=np.float64)
    v = np.asarray(velocity, dtype=np.float64)
    return c0[None, :] + np.arange(frames)[:, None] * v[None, :]


def orbit_path(hub, radius: float, deg_per_frame: float, phase_deg: float, frames: int) -> np.ndarray:
    """Per-frame centers orbiting ``hub`` in the horizontal (xz) plane."""
    hub = np.asarray(hub, dtype=np.float64)
    ang = np.deg2rad(phase_deg + deg_per_frame * np.arange(frames))
    centers = np.tile(hub, (frames, 1))
    centers[:, 0] += radius * np.cos(ang)
    centers[:, 2] += radius * np.sin(ang)
    return centers


@dataclass
class SceneObject:
    """Rigid textured primitive with a per-frame center path."""

    kind: str  # "plane" (fronto-parallel rect) or "box" (axis-aligned)
    centers: np.ndarray  # (T, 3) mm
    size: tuple  # plane: (width, height); box: (sx, sy, sz)
    texture_seed: int = 0
    texture_cell_mm: float = 16.0
    texture_octaves: int = 2
    tint: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("plane", "box"):
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        self.centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 3)


@dataclass
class SynthScene:
    objects: list[SceneObject]
    camera: Intrinsics = DEFAULT_CAMERA
    frames: int = 2
    background_depth_mm: float | None = None
    depth_noise_sigma: float = 0.0
    noise_seed: int = 0
    depth_scale: float = 0.001


@dataclass
class RenderResult:
    rgb: np.ndarray  # (T, H, W, 3) uint8
    depth: np.ndarray  # (T, H, W) uint16 raw units
    rig: CameraRig
    gt_motion: np.ndarray  # (T-1, H, W, 3) float32 mm, NaN where invalid
    owner: np.ndarray  # (T, H, W) int32 object index, -1 background, -2 invalid


def render(scene: SynthScene) -> RenderResult:
    """Z-buffered render of a scene with exact per-pixel ground-truth motion."""
    if not scene.objects:
        raise EmptySceneError("scene has no objects")
    cam = scene.camera
    h, w = cam.height, cam.width
    t_total = scene.frames
    uu, ww = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    ray_x = (uu - cam.cx) / cam.fx
    ray_y = (ww - cam.cy) / cam.fy

    rgb = np.zeros((t_total, h, w, 3), dtype=np.uint8)
    depth = np.zeros((t_total, h, w), dtype=np.uint16)
    owner = np.full((t_total, h, w), OWNER_INVALID, dtype=np.int32)
    raw_per_mm = 1.0 / (scene.depth_scale * 1000.0)

    for t in range(t_total):
        if scene.background_depth_mm is not None:
            zbuf = np.full((h, w), float(scene.background_depth_mm))
            own = np.full((h, w), OWNER_BACKGROUND, dtype=np.int32)
        else:
            zbuf = np.full((h, w), np.inf)
            own = np.full((h, w), OWNER_INVALID, dtype=np.int32)
        tex_a = np.zeros((h, w))
        tex_b = np.zeros((h, w))

        for oid, obj in enumerate(scene.objects):
            center = obj.centers[min(t, obj.centers.shape[0] - 1)]
            if obj.kind == "plane":
                z = center[2]
                if z <= 0:
                    continue
                big_x = ray_x * z
                big_y = ray_y * z
                half_w, half_h = obj.size[0] / 2.0, obj.size[1] / 2.0
                hit = (
                    (np.abs(big_x - center[0]) <= half_w)
                    & (np.abs(big_y - center[1]) <= half_h)
                    & (z < zbuf)
                )
                zbuf[hit] = z
                own[hit] = oid
                tex_a[hit] = big_x[hit] - center[0]
                tex_b[hit] = big_y[hit] - center[1]
            else:
                z_hit, la, lb = _raycast_box(ray_x, ray_y, center, obj.size)
                hit = np.isfinite(z_hit) & (z_hit < zbuf)
                zbuf[hit] = z_hit[hit]
                own[hit] = oid
                tex_a[hit] = la[hit]
                tex_b[hit] = lb[hit]

        frame = np.empty((h, w, 3), dtype=np.float64)
        frame[:] = 0.16  # flat tone for invalid background
        bgmask = own == OWNER_BACKGROUND
        if bgmask.any():
            val = value_noise(uu[bgmask] / 6.0, ww[bgmask] / 6.0, seed=9173)
            frame[bgmask] = (0.25 + 0.35 * val)[:, None]
        for oid, obj in enumerate(scene.objects):
            mask = own == oid
            if not mask.any():
                continue
            val = value_noise(
                tex_a[mask] / obj.texture_cell_mm,
                tex_b[mask] / obj.texture_cell_mm,
                seed=obj.texture_seed,
                octaves=obj.texture_octaves,
            )
            shade = 0.15 + 0.75 * val
            frame[mask] = shade[:, None] * np.asarray(obj.tint)[None, :]
        rgb[t] = np.clip(np.rint(frame * 255.0), 0, 255).astype(np.uint8)

        valid = np.isfinite(zbuf)
        raw = np.zeros((h, w))
        raw[valid] = zbuf[valid] * raw_per_mm
        if scene.depth_noise_sigma > 0:
            rng = np.random.default_rng((scene.noise_seed, t))
            raw[valid] += rng.normal(0.0, scene.depth_noise_sigma, size=int(valid.sum()))
        depth[t] = np.clip(np.rint(raw), 0, 65535).astype(np.uint16)
        depth[t][~valid] = 0
        owner[t] = own

    gt = np.full((t_total - 1, h, w, 3), np.nan, dtype=np.float32)
    for t in range(t_total - 1):
        own = owner[t]
        gt_t = np.full((h, w, 3), np.nan, dtype=np.float32)
        gt_t[own == OWNER_BACKGROUND] = 0.0
        for oid, obj in enumerate(scene.objects):
            idx_now = min(t, obj.centers.shape[0] - 1)
            idx_next = min(t + 1, obj.centers.shape[0] - 1)
            delta = (obj.centers[idx_next] - obj.centers[idx_now]).astype(np.float32)
            gt_t[own == oid] = delta
        gt[t] = gt_t

    rig = CameraRig.identity(cam, scene.depth_scale)
    return RenderResult(rgb, depth, rig, gt, owner)


def _raycast_box(ray_x, ray_y, center, size):
    """Slab intersection of pixel rays (origin 0, dz=1) with an AA box.

    Returns (z of hit or inf, local texture coords a, b) per pixel.
    """
    bmin = np.asarray(center, dtype=np.float64) - np.asarray(size) / 2.0
    bmax = np.asarray(center, dtype=np.float64) + np.asarray(size) / 2.0
    shape = ray_x.shape
    t_near = np.full(shape, -np.inf)
    t_far = np.full(shape, np.inf)
    near_axis = np.zeros(shape, dtype=np.int8)
    dirs = (ray_x, ray_y, np.ones(shape))
    for axis in range(3):
        d = dirs[axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = bmin[axis] / d
            t1 = bmax[axis] / d
        parallel = d == 0
        inside = bmin[axis] <= 0 <= bmax[axis]
        lo = np.where(parallel, -np.inf if inside else np.inf, np.minimum(t0, t1))
        hi = np.where(parallel, np.inf if inside else -np.inf, np.maximum(t0, t1))
        is_nearer = lo > t_near
        near_axis = np.where(is_nearer, axis, near_axis)
        t_near = np.maximum(t_near, lo)
        t_far = np.minimum(t_far, hi)
    hit = (t_near <= t_far) & (t_near > 0)
    z = np.where(hit, t_near, np.inf)
    px = ray_x * t_near - center[0]
    py = ray_y * t_near - center[1]
    pz = t_near - center[2]
    tex_a = np.where(near_axis == 0, py, px)
    tex_b = np.where(near_axis == 2, py, pz)
    return z, tex_a, tex_b


# ---------------------------------------------------------------------------
# canonical motion classes and labeled dataset generation
# ---------------------------------------------------------------------------

_SQ2 = 1.0 / np.sqrt(2.0)
_SQ3 = 1.0 / np.sqrt(3.0)

# name -> linear direction or orbit spec; the first ten span the horizontal
# plane in 45-degree steps plus both vertical directions
MOTION_CLASSES: list[tuple[str, dict]] = [
    ("x_pos", {"dir": (1, 0, 0)}),
    ("x_neg", {"dir": (-1, 0, 0)}),
    ("y_pos", {"dir": (0, 1, 0)}),
    ("y_neg", {"dir": (0, -1, 0)}),
    ("z_pos", {"dir": (0, 0, 1)}),
    ("z_neg", {"dir": (0, 0, -1)}),
    ("xz_pp", {"dir": (_SQ2, 0, _SQ2)}),
    ("xz_pn", {"dir": (_SQ2, 0, -_SQ2)}),
    ("xz_np", {"dir": (-_SQ2, 0, _SQ2)}),
    ("xz_nn", {"dir": (-_SQ2, 0, -_SQ2)}),
    ("xy_pp", {"dir": (_SQ2, _SQ2, 0)}),
    ("xy_pn", {"dir": (_SQ2, -_SQ2, 0)}),
    ("xy_np", {"dir": (-_SQ2, _SQ2, 0)}),
    ("xy_nn", {"dir": (-_SQ2, -_SQ2, 0)}),
    ("yz_pp", {"dir": (0, _SQ2, _SQ2)}),
    ("yz_pn", {"dir": (0, _SQ2, -_SQ2)}),
    ("yz_np", {"dir": (0, -_SQ2, _SQ2)}),
    ("yz_nn", {"dir": (0, -_SQ2, -_SQ2)}),
    ("orbit_ccw", {"orbit": 1}),
    ("orbit_cw", {"orbit": -1}),
    ("xyz_ppp", {"dir": (_SQ3, _SQ3, _SQ3)}),
    ("xyz_nnn", {"dir": (-_SQ3, -_SQ3, -_SQ3)}),
    ("xyz_pnp", {"dir": (_SQ3, -_SQ3, _SQ3)}),
    ("xyz_npn", {"dir": (-_SQ3, _SQ3, -_SQ3)}),
    ("orbit_ccw_up", {"orbit": 1, "dir": (0, 0.7, 0)}),
    ("orbit_cw_down", {"orbit": -1, "dir": (0, -0.7, 0)}),
]


@dataclass
class LabeledSetConfig:
    """Knobs for synthetic labeled dataset generation."""

    grid_dims: tuple[int, int, int] = (54, 54, 54)
    snippet_len: int = 5
    snippets_per_video: int = 1
    image_size: tuple[int, int] = (192, 160)  # (width, height)
    speed_mm: float = 35.0
    view_rotation_deg: float = 0.0
    augment_max_rot_deg: float = 0.0
    augment_max_trans_frac: float = 0.0
    min_motion_mm: float = 0.5
    max_motion_mm: float = 500.0
    from_truth: bool = False
    pad_last: bool = False
    flow: FlowParams = field(default_factory=FlowParams)


def _sample_camera(image_size: tuple[int, int]) -> Intrinsics:
    w, h = image_size
    f = DEFAULT_CAMERA.fx * w / DEFAULT_CAMERA.width
    return Intrinsics(fx=f, fy=f, cx=w / 2.0, cy=h / 2.0, width=w, height=h)


def _class_scene(label: int, frames: int, camera: Intrinsics, speed: float, rng) -> SynthScene:
    """One moving textured plane plus a static textured backdrop."""
    spec = MOTION_CLASSES[label][1]
    z0 = rng.uniform(1400.0, 1700.0)
    jitter = rng.uniform(-60.0, 60.0, size=2)
    center0 = np.array([jitter[0], jitter[1], z0])
    side = rng.uniform(340.0, 430.0)
    speed = speed * rng.uniform(0.85, 1.15)

    paths = []
    if "orbit" in spec:
        radius = rng.uniform(130.0, 170.0)
        deg_per_frame = np.rad2deg(speed / radius) * spec["orbit"]
        phase = rng.uniform(0.0, 360.0)
        path = orbit_path(center0, radius, deg_per_frame, phase, frames)
        if "dir" in spec:
            path = path + linear_path((0, 0, 0), np.asarray(spec["dir"]) * speed, frames)
        paths.append(path)
    else:
        velocity = np.asarray(spec["dir"], dtype=np.float64) * speed
        paths.append(linear_path(center0, velocity, frames))

    mover = SceneObject(
        "plane",
        paths[0],
        (side, side),
        texture_seed=int(rng.integers(1 << 31)),
        texture_cell_mm=5.0 * z0 / camera.fx,  # ~5 px per noise cell
        tint=(1.0, 0.95, 0.9),
    )
    # compact backdrop: anchors the scene's depth extent and gives the flow
    # estimator texture behind the mover, while keeping the geometry's
    # bounding box comparable along every axis (stable under view rotation)
    back_z = z0 + rng.uniform(420.0, 560.0)
    back_side = side * rng.uniform(1.7, 1.9)
    backdrop = SceneObject(
        "plane",
        linear_path((0.0, 0.0, back_z), (0, 0, 0), frames),
        (back_side, back_side),
        texture_seed=int(rng.integers(1 << 31)),
        texture_cell_mm=6.0 * back_z / camera.fx,
        tint=(0.85, 0.9, 1.0),
    )
    return SynthScene([mover, backdrop], camera=camera, frames=frames)


def rigid_translation_scene(
    velocity,
    frames: int = 3,
    seed: int = 0,
    image_size: tuple[int, int] = (256, 212),
    depth_mm: float | None = None,
) -> SynthScene:
    """A textured plane larger than the view translating rigidly.

    Every visible pixel carries the same ground-truth motion, which makes
    medians over the lifted cloud directly comparable to the velocity.
    """
    rng = np.random.default_rng((seed, 4241))
    camera = _sample_camera(image_size)
    z0 = float(depth_mm) if depth_mm is not None else rng.uniform(1400.0, 1900.0)
    margin = 1.6  # plane extends well past the view at every frame
    span_x = margin * 2.0 * camera.cx * z0 / camera.fx
    span_y = margin * 2.0 * camera.cy * z0 / camera.fy
    plane = SceneObject(
        "plane",
        linear_path((0.0, 0.0, z0), velocity, frames),
        (span_x, span_y),
        texture_seed=int(rng.integers(1 << 31)),
        # multi-octave cells from ~16px down to ~4px keep every pyramid
        # level of the flow estimator well textured
        texture_cell_mm=16.0 * z0 / camera.fx,
        texture_octaves=3,
    )
    return SynthScene([plane], camera=camera, frames=frames)


def clouds_from_truth(result: RenderResult, max_points: int = 25000, seed: int = 0) -> list[MotionCloud]:
    """Build per-pair motion clouds straight from rendered ground truth."""
    rig = result.rig
    intr = rig.depth_intrinsics
    clouds = []
    rng = np.random.default_rng(seed)
    for t in range(result.gt_motion.shape[0]):
        valid = (result.depth[t] > 0) & np.isfinite(result.gt_motion[t, ..., 0])
        ws, us = np.nonzero(valid)
        if us.size > max_points:
            keep = rng.choice(us.size, size=max_points, replace=False)
            keep.sort()
            us, ws = us[keep], ws[keep]
        d_mm = result.depth[t][ws, us].astype(np.float64) * rig.depth_scale * 1000.0
        pts = backproject_array(us, ws, d_mm, intr)
        clouds.append(MotionCloud(pts, result.gt_motion[t][ws, us].astype(np.float64), t))
    return clouds


def pipeline_clouds(result: RenderResult, pairs: list[tuple[int, int]], flow_params: FlowParams) -> dict:
    """Run flow + lifting over the given frame index pairs of a render."""
    grays = {}

    def gray(t: int) -> np.ndarray:
        if t not in grays:
            grays[t] = to_gray(result.rgb[t])
        return grays[t]

    clouds = {}
    for a, b in pairs:
        if (a, b) in clouds:
            continue
        if a == b:  # padded pair: no motion by construction
            clouds[(a, b)] = MotionCloud(np.empty((0, 3)), np.empty((0, 3)), a)
            continue
        flow = dense_flow(gray(a), gray(b), flow_params)
        clouds[(a, b)] = lift(flow, result.depth[a], result.depth[b], result.rig, a)
    return clouds


def make_labeled_set(
    n_classes: int,
    samples_per_class: int,
    seed: int,
    out_dir: str | Path,
    config: LabeledSetConfig | None = None,
) -> list[tuple[str, int]]:
    """Render labeled synthetic videos and write their snippet tensors.

    Writes one VXF file per (video, snippet) plus a ``labels.tsv`` index
    (one ``path<TAB>label`` line per record) and a ``manifest.json``.
    Deterministic for a fixed seed. Returns the (relative path, label)
    records in index order.
    """
    if not 1 <= n_classes <= len(MOTION_CLASSES):
        raise ValueError(f"n_classes must be in [1, {len(MOTION_CLASSES)}], got {n_classes}")
    cfg = config or LabeledSetConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    camera = _sample_camera(cfg.image_size)
    k = cfg.snippets_per_video
    l = cfg.snippet_len
    frames = k * l
    records: list[tuple[str, int]] = []

    for label in range(n_classes):
        for sample in range(samples_per_class):
            rng = np.random.default_rng((seed, label, sample))
            scene = _class_scene(label, frames, camera, cfg.speed_mm, rng)
            result = render(scene)
            plan = plan_snippets(frames, k, l)
            needed = sorted({p for ki in range(k) for p in plan.frame_pairs(ki)})
            if cfg.from_truth:
                per_pair = clouds_from_truth(result, seed=int(rng.integers(1 << 31)))
                raw = {pair: per_pair[pair[0]] for pair in needed}
            else:
                raw = pipeline_clouds(result, needed, cfg.flow)

            samples = [c.points[::8].copy() for c in raw.values()]
            clouds = {
                pair: filter_cloud(c, cfg.min_motion_mm, cfg.max_motion_mm)
                for pair, c in raw.items()
            }
            grid = fit_grid(samples, cfg.grid_dims)
            if cfg.view_rotation_deg != 0.0:
                pivot = grid.center
                clouds = {
                    pair: rotate_cloud(c, cfg.view_rotation_deg, pivot)
                    for pair, c in clouds.items()
                }
                rot = rotation_about_y(cfg.view_rotation_deg)
                samples = [(s - pivot) @ rot.T + pivot for s in samples]
                grid = fit_grid(samples, cfg.grid_dims)
            aug = AugmentParams()
            if cfg.augment_max_rot_deg > 0 or cfg.augment_max_trans_frac > 0:
                aug = sample_params(
                    cfg.augment_max_trans_frac,
                    cfg.augment_max_rot_deg,
                    seed=int(rng.integers(1 << 31)),
                )
                clouds = {pair: apply_params(c, aug, grid) for pair, c in clouds.items()}

            video_id = f"c{label:02d}v{sample:04d}"
            for ki in range(k):
                voxed = [voxelize_pair(clouds[p], grid) for p in plan.frame_pairs(ki)]
                tensor = assemble_snippet(voxed, pad_last=cfg.pad_last)
                name = f"{video_id}_k{ki:02d}.vxf"
                meta = store.VxfMeta(
                    video_id=video_id, snippet_index=ki, label=label, aug=aug.as_header()
                )
                store.write_vxf_file(out_dir / name, tensor, meta)
                records.append((name, label))

    with open(out_dir / "labels.tsv", "w") as fh:
        for name, label in records:
            fh.write(f"{name}\t{label}\n")
    manifest = {
        "classes": n_classes,
        "samples_per_class": samples_per_class,
        "seed": seed,
        "records": len(records),
        "grid_dims": list(cfg.grid_dims),
        "snippet_len": cfg.snippet_len,
        "snippets_per_video": cfg.snippets_per_video,
        "view_rotation_deg": cfg.view_rotation_deg,
        "augment_max_rot_deg": cfg.augment_max_rot_deg,
        "augment_max_trans_frac": cfg.augment_max_trans_frac,
        "class_names": [MOTION_CLASSES[i][0] for i in range(n_classes)],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return records


def render_corpus(
    out_dir: str | Path,
    n_videos: int = 3,
    frames: int = 20,
    seed: int = 0,
    image_size: tuple[int, int] = (192, 160),
    speed_mm: float = 35.0,
) -> list[str]:
    """Write raw synthetic videos (rgb/ and depth/ image dirs) plus calib.json.

    Produces the on-disk layout ``cmd_build`` consumes: one directory per
    video with lexicographically ordered frames.
    """
    out_dir = Path(out_dir)
    camera = _sample_camera(image_size)
    video_ids = []
    for v in range(n_videos):
        label = v % len(MOTION_CLASSES)
        rng = np.random.default_rng((seed, 7919, v))
        scene = _class_scene(label, frames, camera, speed_mm, rng)
        result = render(scene)
        video_id = f"video{v:03d}"
        store.save_video(out_dir / video_id, result.rgb, result.depth)
        video_ids.append(video_id)
    save_calibration(out_dir / "calib.json", CameraRig.identity(camera))
    return video_ids
