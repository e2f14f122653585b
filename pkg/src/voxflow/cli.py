"""Command-line interface.

Subcommands: build, synth, bench, inspect, export-ply. Flags mirror the
config-file schema (JSON, via --config); explicit flags win over the
config file. VOXFLOW_WORKERS overrides --workers. Exit codes: 0 ok,
1 partial failure (some videos failed), 2 config or IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import cv2
import numpy as np

from . import store
from .errors import VoxflowError
from .flow2d import FlowParams, dense_flow, to_gray
from .lift3d import filter_cloud, lift
from .pipeline import BuildConfig, build_corpus, build_video, run_bench
from .calib import load_calibration
from .synth import LabeledSetConfig, make_labeled_set, render_corpus

_BUILD_DEFAULTS = {
    "grid": "54,54,54",
    "snippets": 10,
    "len": 5,
    "percentile": 0.99,
    "flow_backend": "farneback",
    "flow_levels": 3,
    "flow_winsize": 15,
    "flow_iters": 3,
    "min_mag": 0.5,
    "max_mag": 500.0,
    "no_filter": False,
    "augment": False,
    "max_rot_deg": 30.0,
    "max_trans_frac": 0.10,
    "pad_last": False,
    "seed": 0,
    "workers": 4,
}


def _parse_grid(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in str(text).replace("x", ",").split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be X,Y,Z, got {text!r}")
    return tuple(parts)


def _add_build_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", help="voxel grid dims X,Y,Z (default 54,54,54)")
    p.add_argument("--snippets", type=int, help="snippets per video (default 10)")
    p.add_argument("--len", type=int, help="frames per snippet (default 5)")
    p.add_argument("--percentile", type=float)
    p.add_argument("--flow-backend", choices=["farneback", "blockmatch"])
    p.add_argument("--flow-levels", type=int)
    p.add_argument("--flow-winsize", type=int)
    p.add_argument("--flow-iters", type=int)
    p.add_argument("--min-mag", type=float, help="motion filter lower bound (mm)")
    p.add_argument("--max-mag", type=float, help="motion filter upper bound (mm)")
    p.add_argument("--no-filter", action="store_const", const=True)
    p.add_argument("--augment", action="store_const", const=True,
                   help="apply random out-of-plane augmentation (train-time only)")
    p.add_argument("--max-rot-deg", type=float)
    p.add_argument("--max-trans-frac", type=float)
    p.add_argument("--pad-last", action="store_const", const=True,
                   help="replicate the last frame pair to reach 3L channels")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--config", help="JSON config file; flags take precedence")


def _merged_options(args: argparse.Namespace) -> dict:
    merged = dict(_BUILD_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        doc = json.loads(Path(config_path).read_text())
        unknown = set(doc) - set(_BUILD_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(doc)
    for key in _BUILD_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if "VOXFLOW_WORKERS" in os.environ:
        merged["workers"] = int(os.environ["VOXFLOW_WORKERS"])
    return merged


def _build_config(opts: dict) -> BuildConfig:
    flow = FlowParams(
        backend=opts["flow_backend"],
        levels=int(opts["flow_levels"]),
        winsize=int(opts["flow_winsize"]),
        iterations=int(opts["flow_iters"]),
    )
    config = BuildConfig(
        grid_dims=_parse_grid(opts["grid"]),
        snippet_count=int(opts["snippets"]),
        snippet_len=int(opts["len"]),
        percentile=float(opts["percentile"]),
        flow=flow,
        filter_enabled=not opts["no_filter"],
        min_motion_mm=float(opts["min_mag"]),
        max_motion_mm=float(opts["max_mag"]),
        augment=bool(opts["augment"]),
        max_rotation_deg=float(opts["max_rot_deg"]),
        max_translation_frac=float(opts["max_trans_frac"]),
        pad_last=bool(opts["pad_last"]),
        seed=int(opts["seed"]),
        workers=int(opts["workers"]),
    )
    config.validate()
    return config


def _cmd_build(args) -> int:
    opts = _merged_options(args)
    config = _build_config(opts)
    calib = Path(args.calib)
    if not calib.is_file():
        print(f"error: calibration file not found: {calib}", file=sys.stderr)
        return 2
    out = Path(args.out)
    if args.input:
        summary = build_corpus(args.input, calib, out, config)
    else:
        rig = load_calibration(calib)
        out.mkdir(parents=True, exist_ok=True)
        video = store.load_video(args.rgb, args.depth)
        video_id = args.video_id or Path(args.rgb).parent.name or "video"
        tensors, aug, stats = build_video(video, rig, config, video_id)
        for k, tensor in enumerate(tensors):
            meta = store.VxfMeta(video_id, k, 0, aug.as_header())
            store.write_vxf_file(out / f"{video_id}_k{k:02d}.vxf", tensor, meta)
        stats["status"] = "ok"
        summary = {"videos": {video_id: stats}, "records": len(tensors), "failed": 0}
    print(json.dumps(summary, indent=2))
    if summary["failed"] and summary["failed"] == len(summary["videos"]):
        return 2
    return 1 if summary["failed"] else 0


def _cmd_synth(args) -> int:
    out = Path(args.out)
    if args.emit == "frames":
        ids = render_corpus(out, n_videos=args.videos, frames=args.frames,
                            seed=args.seed, image_size=args.image_size)
        print(json.dumps({"videos": ids, "out": str(out)}, indent=2))
        return 0
    cfg = LabeledSetConfig(
        grid_dims=_parse_grid(args.grid),
        snippet_len=args.len,
        snippets_per_video=args.snippets_per_video,
        image_size=args.image_size,
        speed_mm=args.speed,
        view_rotation_deg=args.view_rot,
        augment_max_rot_deg=args.augment_rot,
        augment_max_trans_frac=args.augment_trans,
        from_truth=args.from_truth,
        pad_last=args.pad_last or False,
    )
    records = make_labeled_set(args.classes, args.per_class, args.seed, out, cfg)
    print(json.dumps({"records": len(records), "classes": args.classes, "out": str(out)}, indent=2))
    return 0


def _cmd_bench(args) -> int:
    opts = _merged_options(args)
    config = _build_config(opts)
    report = run_bench(config, frames=args.frames, seed=opts["seed"])
    print(json.dumps(report, indent=2))
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    return 0


def inspect_record(path: str | Path) -> dict:
    tensor, meta = store.read_vxf_file(path)
    planes = tensor.planes.reshape(tensor.channels, -1)
    nonzero = planes.any(axis=0)
    return {
        "path": str(path),
        "label": meta.label,
        "snippet_index": meta.snippet_index,
        "dims": list(tensor.spec.dims),
        "channels": tensor.channels,
        "bounds_min": list(tensor.spec.bounds_min),
        "bounds_max": list(tensor.spec.bounds_max),
        "augment": list(meta.aug),
        "occupancy_fraction": float(nonzero.mean()),
        "channel_stats": [
            {
                "min": float(c.min()),
                "mean": float(c.mean()),
                "max": float(c.max()),
            }
            for c in planes
        ],
    }


def _cmd_inspect(args) -> int:
    info = inspect_record(args.path)
    print(json.dumps(info, indent=2))
    if args.ply:
        tensor, _ = store.read_vxf_file(args.path)
        _voxels_to_ply(tensor, args.ply)
        print(f"wrote {args.ply}", file=sys.stderr)
    return 0


def _voxels_to_ply(tensor, out_path) -> None:
    from .lift3d import MotionCloud

    planes = tensor.planes
    pairs = tensor.num_pairs
    per_pair = planes.reshape(pairs, 3, *tensor.spec.dims)
    mean_motion = per_pair.mean(axis=0)  # (3, X, Y, Z) voxel units
    mask = np.moveaxis(planes, 0, -1).any(axis=-1)
    idx = np.argwhere(mask)
    if idx.size == 0:
        raise VoxflowError("record is all zero; nothing to export")
    centers = tensor.spec.voxel_centers(idx)
    vecs = mean_motion[:, idx[:, 0], idx[:, 1], idx[:, 2]].T * tensor.spec.scale[None, :]
    store.export_ply(MotionCloud(centers, vecs), out_path)


def _cmd_export_ply(args) -> int:
    rig = load_calibration(args.calib)
    video = store.load_video(args.rgb, args.depth)
    t = args.pair
    if not 0 <= t < len(video) - 1:
        print(f"error: pair index {t} out of range for {len(video)} frames", file=sys.stderr)
        return 2
    cv2.setNumThreads(1)
    flow = dense_flow(to_gray(video.rgb(t)), to_gray(video.rgb(t + 1)), FlowParams())
    cloud = lift(flow, video.depth(t), video.depth(t + 1), rig, t)
    if not args.no_filter:
        cloud = filter_cloud(cloud, args.min_mag, args.max_mag)
    store.export_ply(cloud, args.out, binary=not args.ascii)
    print(json.dumps({"vertices": len(cloud), "out": args.out}, indent=2))
    return 0


def _size(text: str) -> tuple[int, int]:
    w, h = text.lower().split("x")
    return (int(w), int(h))


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxflow",
        description="Voxelized 3D motion representations from RGB-D video",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build VXF snippet tensors from RGB-D video")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="corpus root (one subdir per video with rgb/ and depth/)")
    src.add_argument("--rgb", help="single video: RGB frame directory")
    b.add_argument("--depth", help="single video: depth frame directory")
    b.add_argument("--calib", required=True, help="calibration JSON")
    b.add_argument("--out", required=True, help="output directory for VXF records")
    b.add_argument("--video-id", default=None)
    _add_build_flags(b)
    b.set_defaults(func=_cmd_build)

    s = sub.add_parser("synth", help="generate synthetic data (VXF set or raw frames)")
    s.add_argument("--out", required=True)
    s.add_argument("--emit", choices=["vxf", "frames"], default="vxf")
    s.add_argument("--classes", type=int, default=10)
    s.add_argument("--per-class", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid", default="54,54,54")
    s.add_argument("--len", type=int, default=5)
    s.add_argument("--snippets-per-video", type=int, default=1)
    s.add_argument("--image-size", type=_size, default=(192, 160), metavar="WxH")
    s.add_argument("--speed", type=float, default=35.0, help="object speed (mm/frame)")
    s.add_argument("--view-rot", type=float, default=0.0,
                   help="fixed viewpoint rotation (deg) applied to every sample")
    s.add_argument("--augment-rot", type=float, default=0.0,
                   help="random rotation bound (deg) per video")
    s.add_argument("--augment-trans", type=float, default=0.0,
                   help="random translation bound (fraction) per video")
    s.add_argument("--from-truth", action="store_true",
                   help="voxelize analytic ground truth instead of running flow")
    s.add_argument("--pad-last", action="store_const", const=True)
    s.add_argument("--videos", type=int, default=3, help="frames mode: video count")
    s.add_argument("--frames", type=int, default=20, help="frames mode: frames per video")
    s.set_defaults(func=_cmd_synth)

    n = sub.add_parser("bench", help="measure pipeline throughput on synthetic input")
    n.add_argument("--frames", type=int, default=30)
    n.add_argument("--report", help="also write the JSON report here")
    _add_build_flags(n)
    n.set_defaults(func=_cmd_bench)

    i = sub.add_parser("inspect", help="print a VXF record's header and statistics")
    i.add_argument("path")
    i.add_argument("--ply", help="export nonzero voxel centers with mean vectors")
    i.set_defaults(func=_cmd_inspect)

    e = sub.add_parser("export-ply", help="export one frame pair's motion cloud as PLY")
    e.add_argument("--rgb", required=True)
    e.add_argument("--depth", required=True)
    e.add_argument("--calib", required=True)
    e.add_argument("--pair", type=int, default=0, help="frame pair index t")
    e.add_argument("--out", required=True)
    e.add_argument("--min-mag", type=float, default=0.5)
    e.add_argument("--max-mag", type=float, default=500.0)
    e.add_argument("--no-filter", action="store_true")
    e.add_argument("--ascii", action="store_true")
    e.set_defaults(func=_cmd_export_ply)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (VoxflowError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
