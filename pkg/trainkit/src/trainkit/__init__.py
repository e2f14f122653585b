"""trainkit: toy-scale two-stream classifier over voxelized motion tensors.

Consumes VXF records and their labels.tsv index (formats documented in
vxf.py); the producing pipeline is a separate package reached only through
those files and its CLI.
"""

from .augment2d import augment_video_frames
from .data import VxfSequenceDataset, group_by_video, train_val_split
from .model import (
    EmptySequenceError,
    MINIATURE_SPEC,
    SequenceClassifier,
    ShapeMismatchError,
    SpatialStub,
    TemporalNet,
    TemporalNetSpec,
    TwoStreamModel,
    global_forward,
    poe_fuse,
    temporal_forward,
)
from .train import TrainConfig, TrainResult, TemporalStream, evaluate_dir, spec_for_dataset, train
from .vxf import VxfFormatError, VxfRecord, read_file, read_index, read_record

__version__ = "0.1.0"
