"""Supervised pre-training of zoo networks (mini-batch SGD on cross-entropy)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import structlog

from autodiff import ops
from autodiff.optim import SgdState, sgd_step
from autodiff.tensor import Tensor
from contracts.errors import NumericError, TrainingError
from digits.dataset import LabeledDataset, batches, class_split, remap_labels
from nets.checkpoint import load_checkpoint, save_checkpoint
from nets.network import NetworkModel
from nets.zoo import build
from utils.run_config import RunConfig
from utils.seeding import derive_seed, substream
from utils.timer import timer

logger = structlog.get_logger(__name__)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_accuracy: float


@dataclass
class TrainingHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].loss if self.epochs else float("nan")

    def to_dict(self) -> dict[str, Any]:
        return {"epochs": [asdict(e) for e in self.epochs]}


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer *targets* (column indices)."""
    onehot = np.zeros(logits.dims)
    onehot[np.arange(targets.size), targets] = 1.0
    picked = ops.sum(ops.mul(ops.log_softmax(logits, axis=1), Tensor(onehot)), axis=1)
    return ops.scale(ops.mean(picked), -1.0)


def pretrain(
    net: NetworkModel,
    dataset: LabeledDataset,
    epochs: int,
    lr: float,
    momentum: float,
    batch_size: int,
    seed: int | np.random.Generator,
) -> TrainingHistory:
    """Train every parameter of *net* in place on *dataset* (original labels).

    Labels are mapped onto ``net.classes`` before training.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    targets_all = remap_labels(dataset.labels, net.classes)
    state = SgdState(learning_rate=lr, momentum=momentum)
    params = net.requires_grad_(True).parameters()
    history = TrainingHistory()
    try:
        for epoch in range(epochs):
            total, correct, seen = 0.0, 0, 0
            with timer(f"pretrain.epoch{epoch}") as t:
                for idx, images, _ in batches(dataset, batch_size, rng):
                    targets = targets_all[idx]
                    logits = net.forward(Tensor(images))
                    loss = cross_entropy(logits, targets)
                    loss.backward()
                    sgd_step(params, state)
                    total += loss.item() * idx.size
                    correct += int((logits.data.argmax(axis=1) == targets).sum())
                    seen += idx.size
            stats = EpochStats(epoch=epoch, loss=total / max(seen, 1), train_accuracy=correct / max(seen, 1))
            history.epochs.append(stats)
            logger.info(
                "nets.pretrain.epoch",
                arch=net.arch,
                epoch=epoch,
                loss=round(stats.loss, 5),
                train_accuracy=round(stats.train_accuracy, 4),
                seconds=round(t.seconds, 1),
            )
    except NumericError as exc:
        raise TrainingError(f"pre-training diverged: {exc}") from exc
    finally:
        net.freeze()
    return history


def checkpoint_name(arch: str, classes: Sequence[int]) -> str:
    """Zoo file name, e.g. ``lenet-01234.pncm``."""
    return f"{arch}-{''.join(str(c) for c in sorted(classes))}.pncm"


def pretrain_checkpoint(
    arch: str,
    classes: Sequence[int],
    train: LabeledDataset,
    config: RunConfig,
    path: str | Path,
) -> tuple[NetworkModel, TrainingHistory]:
    """Build, pre-train on the *classes* split of *train*, save, and reload with its origin set."""
    classes = sorted(int(c) for c in classes)
    net = build(arch, len(classes), derive_seed(config.seed, f"init.{arch}"), classes=classes)
    history = pretrain(
        net,
        class_split(train, classes),
        epochs=config.pretrain_epochs,
        lr=config.pretrain_lr,
        momentum=config.pretrain_momentum,
        batch_size=config.pretrain_batch,
        seed=substream(config.seed, f"training.{arch}"),
    )
    save_checkpoint(net, path)
    return load_checkpoint(path), history


def ensure_pretrained(
    arch: str,
    classes: Sequence[int],
    train: LabeledDataset,
    config: RunConfig,
    zoo_dir: str | Path,
) -> NetworkModel:
    """The zoo checkpoint for (arch, classes), pre-training it first if it is missing."""
    path = Path(zoo_dir) / checkpoint_name(arch, classes)
    if path.is_file():
        logger.info("nets.zoo.hit", path=str(path))
        return load_checkpoint(path)
    net, _ = pretrain_checkpoint(arch, classes, train, config, path)
    return net
