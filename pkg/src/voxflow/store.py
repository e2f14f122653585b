"""Persistence: the VXF snippet-tensor format, PLY export, and frame IO.

VXF byte layout (little-endian throughout)::

    magic[4] = "VXF1"
    u16  version            (1)
    u16  flags              (bit 0: sparse payload)
    u32  label
    u32  snippet_index
    u16  dims[3]            (X, Y, Z)
    u16  channels
    f32  bounds[6]          (min x,y,z then max x,y,z, millimeters)
    f32  aug[4]             (tx, ty, tz fractions, rotation degrees)
    u64  payload_count
    payload:
      sparse: payload_count x { u32 linear voxel index, f32 x channels }
      dense:  X*Y*Z*channels f32, channel-major then x,y,z row-major

Sparse encoding is chosen when fewer than 10% of voxels are nonzero.
Linear voxel index is (x * Y + y) * Z + z.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import (
    BadMagicError,
    CorruptPayloadError,
    DecodeError,
    DimensionMismatchError,
    EmptyCloudError,
    FrameCountMismatchError,
    UnsupportedVersionError,
)
from .lift3d import MotionCloud
from .voxelizer import GridSpec, SnippetTensor

VXF_MAGIC = b"VXF1"
VXF_VERSION = 1
_HEADER = struct.Struct("<4sHHII3HH6f4fQ")
SPARSE_THRESHOLD = 0.10


@dataclass(frozen=True)
class VxfMeta:
    video_id: str = ""
    snippet_index: int = 0
    label: int = 0
    aug: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)


def write_vxf(tensor: SnippetTensor, meta: VxfMeta | None = None, encoding: str | None = None) -> bytes:
    """Serialize a snippet tensor; picks sparse encoding for mostly-empty grids.

    ``encoding`` forces "sparse" or "dense". The video id travels in the
    surrounding file name / label index, not in the record itself.
    """
    meta = meta or VxfMeta()
    x, y, z = tensor.spec.dims
    channels = tensor.channels
    planes = np.ascontiguousarray(tensor.planes, dtype="<f4")
    nonzero = np.nonzero(planes.reshape(channels, -1).any(axis=0))[0]
    if encoding is None:
        encoding = "sparse" if nonzero.size < SPARSE_THRESHOLD * (x * y * z) else "dense"
    sparse = encoding == "sparse"

    if sparse:
        payload_count = nonzero.size
        values = planes.reshape(channels, -1)[:, nonzero].T  # (n, channels)
        entry = np.zeros(nonzero.size, dtype=[("idx", "<u4"), ("val", "<f4", (channels,))])
        entry["idx"] = nonzero
        entry["val"] = values
        payload = entry.tobytes()
    else:
        payload_count = x * y * z * channels
        payload = planes.tobytes()

    header = _HEADER.pack(
        VXF_MAGIC,
        VXF_VERSION,
        1 if sparse else 0,
        meta.label,
        meta.snippet_index,
        x,
        y,
        z,
        channels,
        *[float(v) for v in tensor.spec.bounds_min],
        *[float(v) for v in tensor.spec.bounds_max],
        *[float(v) for v in meta.aug],
        payload_count,
    )
    return header + payload


def write_vxf_file(path: str | Path, tensor: SnippetTensor, meta: VxfMeta | None = None,
                   encoding: str | None = None) -> None:
    Path(path).write_bytes(write_vxf(tensor, meta, encoding))


def read_vxf(data: bytes) -> tuple[SnippetTensor, VxfMeta]:
    """Decode a VXF record; exact inverse of :func:`write_vxf`.

    The decoded tensor has no occupancy counts (the format does not carry
    them); its planes, grid spec, and metadata round-trip bit-exactly.
    """
    if len(data) < _HEADER.size:
        raise CorruptPayloadError("record shorter than header", offset=len(data))
    magic = data[:4]
    if magic != VXF_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    (
        _,
        version,
        flags,
        label,
        snippet_index,
        x,
        y,
        z,
        channels,
        *floats,
        payload_count,
    ) = _HEADER.unpack_from(data)
    if version != VXF_VERSION:
        raise UnsupportedVersionError(f"version {version} not supported")
    bounds_min, bounds_max = tuple(floats[0:3]), tuple(floats[3:6])
    aug = tuple(floats[6:10])
    spec = GridSpec((x, y, z), bounds_min, bounds_max)
    sparse = bool(flags & 1)
    nvox = x * y * z
    payload = data[_HEADER.size:]

    if sparse:
        entry_size = 4 + 4 * channels
        expected = payload_count * entry_size
        if len(payload) != expected:
            raise CorruptPayloadError(
                f"sparse payload holds {len(payload)} bytes, expected {expected}",
                offset=_HEADER.size + min(len(payload), expected),
            )
        planes = np.zeros((channels, nvox), dtype=np.float32)
        if payload_count:
            entry = np.frombuffer(payload, dtype=[("idx", "<u4"), ("val", "<f4", (channels,))])
            idx = entry["idx"]
            if idx.size and int(idx.max()) >= nvox:
                bad = int(np.argmax(idx >= nvox))
                raise CorruptPayloadError(
                    f"voxel index {int(idx[bad])} outside grid of {nvox}",
                    offset=_HEADER.size + bad * entry_size,
                )
            planes[:, idx] = entry["val"].T
        planes = planes.reshape((channels, x, y, z))
    else:
        expected = nvox * channels * 4
        if payload_count != nvox * channels or len(payload) != expected:
            raise CorruptPayloadError(
                f"dense payload holds {len(payload)} bytes, expected {expected}",
                offset=_HEADER.size + min(len(payload), expected),
            )
        planes = np.frombuffer(payload, dtype="<f4").reshape((channels, x, y, z)).copy()

    meta = VxfMeta("", snippet_index, label, aug)
    return SnippetTensor(planes, None, spec), meta


def read_vxf_file(path: str | Path) -> tuple[SnippetTensor, VxfMeta]:
    return read_vxf(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# PLY export of motion clouds
# ---------------------------------------------------------------------------

_PLY_PROPS = ("x", "y", "z", "dx", "dy", "dz")


def export_ply(cloud: MotionCloud, path: str | Path | None = None, binary: bool = True) -> bytes:
    """Serialize a motion cloud as PLY with per-vertex motion properties."""
    if len(cloud) == 0:
        raise EmptyCloudError("refusing to export an empty cloud")
    rows = np.hstack([cloud.points, cloud.motions]).astype("<f4")
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {len(cloud)}"]
    header += [f"property float {p}" for p in _PLY_PROPS]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")
    if binary:
        body = rows.tobytes()
    else:
        body = "\n".join(" ".join(f"{v:.6g}" for v in row) for row in rows).encode("ascii") + b"\n"
    data = head + body
    if path is not None:
        Path(path).write_bytes(data)
    return data


def read_ply(data: bytes) -> MotionCloud:
    """Parse PLY produced by :func:`export_ply` (positions + motion vectors)."""
    end = data.find(b"end_header\n")
    if end < 0:
        raise DecodeError("missing PLY end_header")
    header_lines = data[:end].decode("ascii").splitlines()
    body = data[end + len(b"end_header\n"):]
    if not header_lines or header_lines[0] != "ply":
        raise DecodeError("not a PLY stream")
    fmt = next((l.split()[1] for l in header_lines if l.startswith("format ")), None)
    count = next((int(l.split()[2]) for l in header_lines if l.startswith("element vertex")), None)
    props = [l.split()[2] for l in header_lines if l.startswith("property ")]
    if count is None or tuple(props) != _PLY_PROPS:
        raise DecodeError("unexpected PLY layout")
    if fmt == "binary_little_endian":
        rows = np.frombuffer(body[: count * 24], dtype="<f4").reshape(count, 6)
    elif fmt == "ascii":
        rows = np.loadtxt(body.decode("ascii").splitlines(), dtype=np.float64, ndmin=2)
    else:
        raise DecodeError(f"unsupported PLY format {fmt}")
    if rows.shape != (count, 6):
        raise DecodeError(f"PLY body has shape {rows.shape}, expected ({count}, 6)")
    return MotionCloud(rows[:, :3], rows[:, 3:])


# ---------------------------------------------------------------------------
# video frame IO
# ---------------------------------------------------------------------------

_IMG_EXTS = (".png", ".pgm", ".tif", ".tiff", ".jpg", ".jpeg", ".bin")


class VideoFrames:
    """Synchronized access to an RGB + depth frame-sequence pair.

    Frames are decoded lazily by index. Depth may be 16-bit single-channel
    images or raw ``.bin`` files with a ``dims.json`` sidecar giving
    ``{"width": W, "height": H}``.
    """

    def __init__(self, rgb_dir: str | Path, depth_dir: str | Path):
        self.rgb_paths = _list_frames(rgb_dir)
        self.depth_paths = _list_frames(depth_dir)
        if len(self.rgb_paths) != len(self.depth_paths):
            raise FrameCountMismatchError(
                f"{len(self.rgb_paths)} RGB frames vs {len(self.depth_paths)} depth frames"
            )
        self._depth_dims = None
        sidecar = Path(depth_dir) / "dims.json"
        if sidecar.exists():
            import json

            dims = json.loads(sidecar.read_text())
            self._depth_dims = (int(dims["height"]), int(dims["width"]))

    def __len__(self) -> int:
        return len(self.rgb_paths)

    def rgb(self, t: int) -> np.ndarray:
        bgr = cv2.imread(str(self.rgb_paths[t]), cv2.IMREAD_COLOR)
        if bgr is None:
            raise DecodeError(f"cannot decode RGB frame {self.rgb_paths[t]}")
        return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)

    def depth(self, t: int) -> np.ndarray:
        path = self.depth_paths[t]
        if path.suffix == ".bin":
            if self._depth_dims is None:
                raise DecodeError(f"raw depth {path} requires a dims.json sidecar")
            raw = np.frombuffer(path.read_bytes(), dtype="<u2")
            h, w = self._depth_dims
            if raw.size != h * w:
                raise DecodeError(f"raw depth {path} holds {raw.size} values, expected {h * w}")
            return raw.reshape(h, w)
        img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise DecodeError(f"cannot decode depth frame {path}")
        if img.ndim != 2:
            raise DecodeError(f"depth frame {path} is not single-channel")
        return img.astype(np.uint16)

    def pair(self, a: int, b: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.rgb(a), self.rgb(b), self.depth(a), self.depth(b)


class ArrayVideo:
    """In-memory frames behind the same interface as :class:`VideoFrames`."""

    def __init__(self, rgb: np.ndarray, depth: np.ndarray):
        if rgb.shape[0] != depth.shape[0]:
            raise FrameCountMismatchError(f"{rgb.shape[0]} RGB frames vs {depth.shape[0]} depth")
        self._rgb = rgb
        self._depth = depth

    def __len__(self) -> int:
        return self._rgb.shape[0]

    def rgb(self, t: int) -> np.ndarray:
        return self._rgb[t]

    def depth(self, t: int) -> np.ndarray:
        return self._depth[t]


def _list_frames(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DecodeError(f"frame directory {directory} does not exist")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in _IMG_EXTS)


def load_video(rgb_dir: str | Path, depth_dir: str | Path) -> VideoFrames:
    """Open synchronized frame directories; counts must match."""
    return VideoFrames(rgb_dir, depth_dir)


def save_video(video_dir: str | Path, rgb: np.ndarray, depth: np.ndarray) -> None:
    """Write frames as PNG sequences under ``video_dir/rgb`` and ``video_dir/depth``."""
    if rgb.shape[0] != depth.shape[0]:
        raise DimensionMismatchError("frame counts differ")
    rgb_dir = Path(video_dir) / "rgb"
    depth_dir = Path(video_dir) / "depth"
    rgb_dir.mkdir(parents=True, exist_ok=True)
    depth_dir.mkdir(parents=True, exist_ok=True)
    for t in range(rgb.shape[0]):
        cv2.imwrite(str(rgb_dir / f"{t:05d}.png"), cv2.cvtColor(rgb[t], cv2.COLOR_RGB2BGR))
        cv2.imwrite(str(depth_dir / f"{t:05d}.png"), depth[t])
