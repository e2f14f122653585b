"""Reader for VXF motion-tensor records.

Implemented directly against the published byte layout (little-endian):

    magic[4]="VXF1", u16 version, u16 flags (bit0 sparse), u32 label,
    u32 snippet_index, u16 dims[3], u16 channels, f32 bounds[6],
    f32 aug[4], u64 payload_count, payload.

    sparse payload: count x { u32 linear voxel index, f32 x channels }
    dense payload:  X*Y*Z*channels f32, channel-major then x,y,z row-major
    linear index = (x * Y + y) * Z + z

This module deliberately shares no code with the producer; it is the
consuming side of the format contract.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<4sHHII3HH6f4fQ")


class VxfFormatError(ValueError):
    pass


@dataclass(frozen=True)
class VxfRecord:
    planes: np.ndarray  # (channels, X, Y, Z) float32
    dims: tuple[int, int, int]
    channels: int
    label: int
    snippet_index: int
    bounds_min: tuple[float, float, float]
    bounds_max: tuple[float, float, float]
    aug: tuple[float, float, float, float]


def read_record(data: bytes) -> VxfRecord:
    if len(data) < _HEADER.size:
        raise VxfFormatError(f"record truncated at {len(data)} bytes")
    (magic, version, flags, label, snippet_index,
     x, y, z, channels, *floats, payload_count) = _HEADER.unpack_from(data)
    if magic != b"VXF1":
        raise VxfFormatError(f"bad magic {magic!r}")
    if version != 1:
        raise VxfFormatError(f"unsupported version {version}")
    payload = data[_HEADER.size:]
    nvox = x * y * z

    if flags & 1:
        entry = np.dtype([("idx", "<u4"), ("val", "<f4", (channels,))])
        if len(payload) != payload_count * entry.itemsize:
            raise VxfFormatError("sparse payload length mismatch")
        planes = np.zeros((channels, nvox), dtype=np.float32)
        if payload_count:
            rows = np.frombuffer(payload, dtype=entry)
            if rows["idx"].size and int(rows["idx"].max()) >= nvox:
                raise VxfFormatError("sparse index outside the voxel grid")
            planes[:, rows["idx"]] = rows["val"].T
        planes = planes.reshape(channels, x, y, z)
    else:
        if payload_count != nvox * channels or len(payload) != payload_count * 4:
            raise VxfFormatError("dense payload length mismatch")
        planes = np.frombuffer(payload, dtype="<f4").reshape(channels, x, y, z).copy()

    return VxfRecord(
        planes=planes,
        dims=(x, y, z),
        channels=channels,
        label=label,
        snippet_index=snippet_index,
        bounds_min=tuple(floats[0:3]),
        bounds_max=tuple(floats[3:6]),
        aug=tuple(floats[6:10]),
    )


def read_file(path: str | Path) -> VxfRecord:
    return read_record(Path(path).read_bytes())


def read_index(dataset_dir: str | Path) -> list[tuple[Path, int]]:
    """Parse labels.tsv: one ``path<TAB>label`` line per record."""
    dataset_dir = Path(dataset_dir)
    index = dataset_dir / "labels.tsv"
    if not index.is_file():
        raise FileNotFoundError(f"no labels.tsv under {dataset_dir}")
    records = []
    for line in index.read_text().splitlines():
        if not line.strip():
            continue
        path, label = line.rsplit("\t", 1)
        records.append((dataset_dir / path, int(label)))
    return records
