"""Datasets over VXF records and their labels.tsv index.

Records are grouped into per-video snippet sequences by file name
(everything before the trailing ``_kNN`` suffix), ordered by the snippet
index stored in each record's header.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

from . import vxf

_SNIPPET_SUFFIX = re.compile(r"_k\d+$")


def video_key(path: Path) -> str:
    return _SNIPPET_SUFFIX.sub("", path.stem)


@dataclass
class VideoSample:
    video_id: str
    paths: list[Path]  # one per snippet, ordered by snippet index
    label: int


def group_by_video(records: list[tuple[Path, int]]) -> list[VideoSample]:
    groups: dict[str, VideoSample] = {}
    for path, label in records:
        key = video_key(path)
        sample = groups.setdefault(key, VideoSample(key, [], label))
        if sample.label != label:
            raise ValueError(f"video {key} carries conflicting labels")
        sample.paths.append(path)
    for sample in groups.values():
        sample.paths.sort(key=lambda p: vxf.read_file(p).snippet_index)
    return [groups[k] for k in sorted(groups)]


class VxfSequenceDataset(Dataset):
    """Per-video sequences of snippet tensors: (K, C, X, Y, Z) float32 + label."""

    def __init__(self, dataset_dir: str | Path):
        self.samples = group_by_video(vxf.read_index(dataset_dir))
        if not self.samples:
            raise ValueError(f"no records indexed under {dataset_dir}")
        first = vxf.read_file(self.samples[0].paths[0])
        self.dims = first.dims
        self.channels = first.channels
        self.n_classes = max(s.label for s in self.samples) + 1

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, i: int):
        sample = self.samples[i]
        planes = [vxf.read_file(p).planes for p in sample.paths]
        tensor = torch.from_numpy(np.stack(planes)).float()
        return tensor, sample.label


def train_val_split(dataset: VxfSequenceDataset, val_fraction: float, seed: int):
    """Deterministic index split; validation gets ceil(n * fraction) items."""
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(np.ceil(n * val_fraction)) if val_fraction > 0 else 0
    return list(map(int, order[n_val:])), list(map(int, order[:n_val]))
