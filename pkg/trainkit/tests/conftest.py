import subprocess
import sys

import pytest
import torch

torch.set_num_threads(1)

SYNTH_ARGS = ["--grid", "12,12,12", "--len", "3", "--image-size", "96x80"]


def synth_dataset(out_dir, classes, per_class, seed, *extra):
    """Generate a labeled VXF dataset through the producer's CLI."""
    cmd = [
        sys.executable, "-m", "voxflow", "synth",
        "--out", str(out_dir),
        "--classes", str(classes),
        "--per-class", str(per_class),
        "--seed", str(seed),
        *SYNTH_ARGS,
        *extra,
    ]
    subprocess.run(cmd, check=True, capture_output=True)
    return out_dir


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """4 classes x 6 videos; enough for loop/loader tests."""
    return synth_dataset(tmp_path_factory.mktemp("tiny"), 4, 6, 11)
