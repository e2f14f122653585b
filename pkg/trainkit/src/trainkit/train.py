"""Training loop for the temporal stream over VXF sequence datasets.

Cross-entropy loss, adaptive-moment optimizer at lr 0.001 halved every 10
epochs, 5% validation split for stopping, per-epoch metrics as
line-delimited JSON records (epoch, split, loss, accuracy), best-validation
checkpoint retained. Deterministic for a fixed seed at a fixed torch
thread count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import VxfSequenceDataset, train_val_split
from .model import SequenceClassifier, TemporalNet, TemporalNetSpec, temporal_forward


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    learning_rate: float = 1e-3
    lr_halving_every: int = 10
    val_fraction: float = 0.05
    hidden_size: int = 256
    seed: int = 0
    stop_at_train_acc: float | None = None
    out_dir: str | Path | None = None
    spec: TemporalNetSpec | None = None  # derived from the data when None


@dataclass
class TrainResult:
    model: nn.Module
    history: list[dict]
    best_val_accuracy: float
    final_train_accuracy: float
    checkpoint: Path | None


class TemporalStream(nn.Module):
    """Temporal net plus its sequence head, trained as one unit."""

    def __init__(self, spec: TemporalNetSpec, n_classes: int, hidden_size: int):
        super().__init__()
        self.net = TemporalNet(spec)
        self.head = SequenceClassifier(spec.feature_size, hidden_size, n_classes)

    def forward(self, snippets: torch.Tensor) -> torch.Tensor:
        return self.head(temporal_forward(self.net, snippets))


def spec_for_dataset(dataset: VxfSequenceDataset, widths=(8, 16, 24, 32)) -> TemporalNetSpec:
    """A reduction chain for the dataset's grid size, found by searching
    pool sizes stage by stage (largest feasible pool first)."""
    grid = dataset.dims[0]
    kernels = (3, 3, 3, 2)
    paddings = (1, 1, 1, 1)
    for pools in _pool_chains(grid, kernels, paddings):
        spec = TemporalNetSpec(
            grid=grid,
            in_channels=dataset.channels,
            widths=tuple(widths),
            kernels=kernels,
            paddings=paddings,
            pools=pools,
        )
        try:
            spec.layer_sizes()
            return spec
        except Exception:
            continue
    raise ValueError(f"no pooling chain reduces grid {grid} to 1 in four stages")


def _pool_chains(grid: int, kernels, paddings, stage=0, size=None, acc=()):
    size = grid if size is None else size
    if stage == len(kernels):
        if size == 1:
            yield acc
        return
    conv_out = size + 2 * paddings[stage] - kernels[stage] + 1
    for pool in range(min(conv_out, 6), 0, -1):
        out = conv_out // pool
        if out >= 1:
            yield from _pool_chains(grid, kernels, paddings, stage + 1, out, acc + (pool,))


def _evaluate(model, tensors, labels, batch_size):
    model.eval()
    losses, correct = [], 0
    loss_fn = nn.CrossEntropyLoss(reduction="sum")
    with torch.no_grad():
        for i in range(0, len(labels), batch_size):
            x = tensors[i : i + batch_size]
            y = labels[i : i + batch_size]
            logits = model(x)
            losses.append(float(loss_fn(logits, y)))
            correct += int((logits.argmax(dim=1) == y).sum())
    n = len(labels)
    return sum(losses) / n, correct / n


def train(dataset_dir: str | Path, config: TrainConfig | None = None) -> TrainResult:
    """Train the temporal stream on a VXF dataset directory.

    Returns per-epoch history and keeps the best-validation checkpoint when
    an output directory is configured.
    """
    config = config or TrainConfig()
    torch.manual_seed(config.seed)
    dataset = VxfSequenceDataset(dataset_dir)
    spec = config.spec or spec_for_dataset(dataset)
    if spec.in_channels != dataset.channels or spec.grid != dataset.dims[0]:
        raise ValueError(
            f"spec expects {spec.in_channels}ch {spec.grid}^3, dataset has "
            f"{dataset.channels}ch {dataset.dims}"
        )
    model = TemporalStream(spec, dataset.n_classes, config.hidden_size)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=config.lr_halving_every, gamma=0.5
    )
    loss_fn = nn.CrossEntropyLoss()

    # datasets at toy scale fit in memory; load once for throughput
    all_x = torch.stack([dataset[i][0] for i in range(len(dataset))])
    all_y = torch.tensor([dataset[i][1] for i in range(len(dataset))])
    train_idx, val_idx = train_val_split(dataset, config.val_fraction, config.seed)
    x_train, y_train = all_x[train_idx], all_y[train_idx]
    x_val, y_val = all_x[val_idx], all_y[val_idx]

    out_dir = Path(config.out_dir) if config.out_dir else None
    metrics_fh = None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(out_dir / "metrics.jsonl", "w")

    rng = np.random.default_rng(config.seed)
    history: list[dict] = []
    best_val = -1.0
    final_train_acc = 0.0
    checkpoint = out_dir / "best.pt" if out_dir else None

    def log(epoch, split, loss, acc, **extra):
        record = {"epoch": epoch, "split": split, "loss": round(loss, 6), "accuracy": round(acc, 6)}
        record.update(extra)
        history.append(record)
        if metrics_fh:
            metrics_fh.write(json.dumps(record) + "\n")
            metrics_fh.flush()

    try:
        for epoch in range(config.epochs):
            model.train()
            order = rng.permutation(len(y_train))
            epoch_loss, correct = 0.0, 0
            for i in range(0, len(order), config.batch_size):
                batch = order[i : i + config.batch_size]
                x, y = x_train[batch], y_train[batch]
                optimizer.zero_grad()
                logits = model(x)
                loss = loss_fn(logits, y)
                loss.backward()
                optimizer.step()
                epoch_loss += float(loss.detach()) * len(batch)
                correct += int((logits.argmax(dim=1) == y).sum())
            train_acc = correct / len(y_train)
            final_train_acc = train_acc
            log(epoch, "train", epoch_loss / len(y_train), train_acc,
                lr=optimizer.param_groups[0]["lr"])

            if len(y_val):
                val_loss, val_acc = _evaluate(model, x_val, y_val, config.batch_size)
                log(epoch, "val", val_loss, val_acc)
                if val_acc > best_val:
                    best_val = val_acc
                    if checkpoint:
                        torch.save(
                            {"state_dict": model.state_dict(), "epoch": epoch,
                             "val_accuracy": val_acc, "spec": spec},
                            checkpoint,
                        )
            scheduler.step()
            if config.stop_at_train_acc and train_acc >= config.stop_at_train_acc:
                break
    finally:
        if metrics_fh:
            metrics_fh.close()

    return TrainResult(
        model=model,
        history=history,
        best_val_accuracy=best_val,
        final_train_accuracy=final_train_acc,
        checkpoint=checkpoint if (checkpoint and checkpoint.exists()) else None,
    )


def evaluate_dir(model: nn.Module, dataset_dir: str | Path, batch_size: int = 32) -> float:
    """Accuracy of a trained stream over a held-out VXF dataset."""
    dataset = VxfSequenceDataset(dataset_dir)
    x = torch.stack([dataset[i][0] for i in range(len(dataset))])
    y = torch.tensor([dataset[i][1] for i in range(len(dataset))])
    _, acc = _evaluate(model, x, y, batch_size)
    return acc
