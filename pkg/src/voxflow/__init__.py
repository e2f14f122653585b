"""voxflow: voxelized 3D motion fields from RGB-D video.

Dense optical flow over the RGB stream is lifted through the registered
depth stream into per-pixel 3D motion vectors, which are averaged into a
per-video voxel grid and stacked over snippet frame pairs. The resulting
tensors serialize to the VXF format consumed by downstream classifiers.
"""

from .augment import AugmentParams, apply_params, rotate_cloud, sample_params, translate_cloud
from .calib import (
    CameraRig,
    Intrinsics,
    Point3,
    backproject,
    load_calibration,
    project,
    register_rgb_pixel,
    save_calibration,
)
from .errors import VoxflowError
from .flow2d import FlowParams, dense_flow, to_gray
from .lift3d import MotionCloud, filter_cloud, lift
from .pipeline import (
    BuildConfig,
    MotionGridVoxelizer,
    SnippetVoxelPipeline,
    build_corpus,
    build_video,
    run_bench,
)
from .sampler import SnippetPlan, center_frame, plan_snippets
from .store import VxfMeta, export_ply, load_video, read_vxf, read_vxf_file, write_vxf, write_vxf_file
from .voxelizer import GridSpec, SnippetTensor, VoxelizedPair, assemble_snippet, fit_grid, voxelize_pair

__version__ = "0.1.0"

__all__ = [
    "AugmentParams",
    "BuildConfig",
    "CameraRig",
    "FlowParams",
    "GridSpec",
    "Intrinsics",
    "MotionCloud",
    "MotionGridVoxelizer",
    "Point3",
    "SnippetPlan",
    "SnippetTensor",
    "SnippetVoxelPipeline",
    "VoxelizedPair",
    "VoxflowError",
    "VxfMeta",
    "apply_params",
    "assemble_snippet",
    "backproject",
    "build_corpus",
    "build_video",
    "center_frame",
    "dense_flow",
    "export_ply",
    "filter_cloud",
    "fit_grid",
    "lift",
    "load_calibration",
    "load_video",
    "plan_snippets",
    "project",
    "read_vxf",
    "read_vxf_file",
    "register_rgb_pixel",
    "rotate_cloud",
    "run_bench",
    "sample_params",
    "save_calibration",
    "to_gray",
    "translate_cloud",
    "voxelize_pair",
    "write_vxf",
    "write_vxf_file",
]
