"""In-plane image augmentation for the spatial stream.

Random crop, color jitter, and rotation up to +/-15 degrees. One parameter
draw covers all of a video's center frames, so augmentation is consistent
within a sample and varies only across samples and iterations. Inference
applies resizing and normalization only.
"""

from __future__ import annotations

import torch
import torchvision.transforms.functional as TF


def augment_video_frames(
    frames: torch.Tensor,
    seed: int,
    max_rotation_deg: float = 15.0,
    crop_scale: float = 0.8,
    jitter: float = 0.2,
) -> torch.Tensor:
    """Apply one random crop/jitter/rotation draw to all K frames of a video.

    ``frames`` is (K, 3, H, W) in [0, 1]; output matches the input size.
    """
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise ValueError(f"expected (K, 3, H, W), got {tuple(frames.shape)}")
    gen = torch.Generator().manual_seed(seed)

    def draw(lo: float, hi: float) -> float:
        return float(torch.empty(1).uniform_(lo, hi, generator=gen))

    k, _, h, w = frames.shape
    angle = draw(-max_rotation_deg, max_rotation_deg)
    scale = draw(crop_scale, 1.0)
    ch, cw = int(h * scale), int(w * scale)
    top = int(draw(0, h - ch)) if h > ch else 0
    left = int(draw(0, w - cw)) if w > cw else 0
    brightness = draw(1 - jitter, 1 + jitter)
    contrast = draw(1 - jitter, 1 + jitter)
    saturation = draw(1 - jitter, 1 + jitter)

    out = TF.rotate(frames, angle)
    out = out[:, :, top : top + ch, left : left + cw]
    out = TF.resize(out, [h, w], antialias=True)
    out = TF.adjust_brightness(out, brightness)
    out = TF.adjust_contrast(out, contrast)
    out = TF.adjust_saturation(out, saturation)
    return out.clamp(0.0, 1.0)
