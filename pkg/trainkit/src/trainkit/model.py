"""Two-stream network pieces: 3D-CNN temporal stream, 2D spatial stub,
per-stream LSTM sequence heads, and product-of-experts fusion.

The temporal stream is four stages of 3D convolution (stride 1) with 3D
batch normalization, ReLU, and max pooling; default kernels 3,3,3,2 with
channel widths 64/128/256/512 collapse a 54^3 grid to a single 512-vector
(54 -> 18 -> 6 -> 2 -> conv to 3 -> pool to 1). Every configuration is
checked symbolically at construction so shape errors surface early.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import torch
from torch import nn

logger = logging.getLogger("trainkit")


class ShapeMismatchError(ValueError):
    pass


class EmptySequenceError(ValueError):
    pass


@dataclass(frozen=True)
class TemporalNetSpec:
    """Architecture of the volumetric motion stream."""

    grid: int = 54
    in_channels: int = 12  # 3 * (L - 1) with L = 5
    widths: tuple[int, ...] = (64, 128, 256, 512)
    kernels: tuple[int, ...] = (3, 3, 3, 2)
    paddings: tuple[int, ...] = (1, 1, 1, 1)
    pools: tuple[int, ...] = (3, 3, 3, 3)

    def layer_sizes(self) -> list[int]:
        """Spatial side length after each stage; must end at 1."""
        sizes = [self.grid]
        s = self.grid
        for k, p, pool in zip(self.kernels, self.paddings, self.pools):
            s = s + 2 * p - k + 1
            if s < 1:
                raise ShapeMismatchError(f"convolution collapses size below 1: {sizes}")
            s = s // pool
            if s < 1:
                raise ShapeMismatchError(f"pooling collapses size below 1: {sizes}")
            sizes.append(s)
        if sizes[-1] != 1:
            raise ShapeMismatchError(
                f"stage sizes {sizes} do not reduce the grid to a single cell"
            )
        return sizes

    @property
    def feature_size(self) -> int:
        return self.widths[-1]


MINIATURE_SPEC = TemporalNetSpec(
    grid=6, in_channels=2, widths=(2, 2, 2, 4), pools=(2, 3, 1, 2)
)


class TemporalNet(nn.Module):
    """3D CNN over one snippet tensor -> one feature vector."""

    def __init__(self, spec: TemporalNetSpec | None = None):
        super().__init__()
        self.spec = spec or TemporalNetSpec()
        self.spec.layer_sizes()  # validate the reduction chain
        stages = []
        channels = self.spec.in_channels
        for width, k, p, pool in zip(
            self.spec.widths, self.spec.kernels, self.spec.paddings, self.spec.pools
        ):
            stages.append(
                nn.Sequential(
                    nn.Conv3d(channels, width, kernel_size=k, stride=1, padding=p),
                    nn.BatchNorm3d(width),
                    nn.ReLU(inplace=True),
                    nn.MaxPool3d(pool),
                )
            )
            channels = width
        self.stages = nn.ModuleList(stages)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        spec = self.spec
        if x.ndim != 5 or x.shape[1] != spec.in_channels or x.shape[2:] != (spec.grid,) * 3:
            raise ShapeMismatchError(
                f"expected (B, {spec.in_channels}, {spec.grid}^3), got {tuple(x.shape)}"
            )
        for stage in self.stages:
            x = stage(x)
        return x.flatten(1)


def temporal_forward(net: TemporalNet, snippets: torch.Tensor) -> torch.Tensor:
    """(B, K, C, X, Y, Z) batches of K snippet tensors -> (B, K, F) features."""
    if snippets.ndim != 6:
        raise ShapeMismatchError(f"expected (B, K, C, X, Y, Z), got {tuple(snippets.shape)}")
    b, k = snippets.shape[:2]
    features = net(snippets.reshape(b * k, *snippets.shape[2:]))
    return features.reshape(b, k, -1)


class SequenceClassifier(nn.Module):
    """LSTM over per-snippet features; last output feeds the logits layer.

    Defaults follow the global temporal model: input 512, hidden 256,
    no dropout, logits = class count.
    """

    def __init__(self, input_size: int = 512, hidden_size: int = 256, n_classes: int = 60):
        super().__init__()
        self.lstm = nn.LSTM(input_size, hidden_size, batch_first=True)
        self.logits = nn.Linear(hidden_size, n_classes)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        if features.ndim != 3 or features.shape[1] < 1:
            raise EmptySequenceError(f"expected (B, K>=1, F), got {tuple(features.shape)}")
        out, _ = self.lstm(features)
        return self.logits(out[:, -1])


def global_forward(head: SequenceClassifier, features: torch.Tensor) -> torch.Tensor:
    """Sequence of K features -> class probabilities (rows sum to 1)."""
    return torch.softmax(head(features), dim=-1)


def poe_fuse(spatial: torch.Tensor, temporal: torch.Tensor) -> torch.Tensor:
    """Product-of-experts fusion: elementwise product, renormalized.

    Disjoint supports (all-zero product) fall back to the arithmetic mean
    of the two distributions, with a warning.
    """
    if spatial.shape != temporal.shape:
        raise ShapeMismatchError(
            f"stream shapes differ: {tuple(spatial.shape)} vs {tuple(temporal.shape)}"
        )
    product = spatial * temporal
    total = product.sum(dim=-1, keepdim=True)
    dead = total.squeeze(-1) == 0
    if bool(dead.any()):
        logger.warning("product of experts collapsed to zero; using the stream mean")
        mean = 0.5 * (spatial + temporal)
        product = torch.where(dead.unsqueeze(-1), mean, product)
        total = product.sum(dim=-1, keepdim=True)
    return product / total


class SpatialStub(nn.Module):
    """Small 2D CNN over snippet center frames, standing in for a pretrained
    backbone at toy scale; emits the same feature width as the temporal
    stream so both LSTMs share one shape."""

    def __init__(self, feature_size: int = 512):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(3, 16, 3, padding=1), nn.BatchNorm2d(16), nn.ReLU(inplace=True),
            nn.MaxPool2d(4),
            nn.Conv2d(16, 32, 3, padding=1), nn.BatchNorm2d(32), nn.ReLU(inplace=True),
            nn.MaxPool2d(4),
            nn.Conv2d(32, 64, 3, padding=1), nn.BatchNorm2d(64), nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
        )
        self.proj = nn.Linear(64, feature_size)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ShapeMismatchError(f"expected (N, 3, H, W) images, got {tuple(images.shape)}")
        return self.proj(self.body(images).flatten(1))


class TwoStreamModel(nn.Module):
    """Temporal and spatial streams with separate LSTM heads, fused by
    product of experts at prediction time. Streams are trained separately;
    gradients never cross the fusion."""

    def __init__(
        self,
        temporal_spec: TemporalNetSpec | None = None,
        n_classes: int = 60,
        hidden_size: int = 256,
    ):
        super().__init__()
        self.temporal = TemporalNet(temporal_spec)
        feat = self.temporal.spec.feature_size
        self.temporal_head = SequenceClassifier(feat, hidden_size, n_classes)
        self.spatial = SpatialStub(feat)
        self.spatial_head = SequenceClassifier(feat, hidden_size, n_classes)

    def temporal_logits(self, snippets: torch.Tensor) -> torch.Tensor:
        return self.temporal_head(temporal_forward(self.temporal, snippets))

    def spatial_logits(self, frames: torch.Tensor) -> torch.Tensor:
        b, k = frames.shape[:2]
        features = self.spatial(frames.reshape(b * k, *frames.shape[2:]))
        return self.spatial_head(features.reshape(b, k, -1))

    def predict(self, snippets: torch.Tensor, frames: torch.Tensor) -> torch.Tensor:
        spatial = torch.softmax(self.spatial_logits(frames), dim=-1)
        temporal = torch.softmax(self.temporal_logits(snippets), dim=-1)
        return poe_fuse(spatial, temporal)
