"""Top-1 accuracy over mapped logits (Ori / Tar / Avg) and the direct-ensemble baseline."""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from contracts.errors import ContractError
from contracts.records import AccuracyReport
from digits.dataset import LabeledDataset
from nets.network import NetworkModel


class LogitModel(Protocol):
    def predict_logits(self, images: np.ndarray, batch_size: int = 500) -> np.ndarray: ...


def _mean_or_none(hits: np.ndarray) -> float | None:
    return float(hits.mean()) if hits.size else None


def accuracy_from_logits(
    logits: np.ndarray,
    labels: np.ndarray,
    class_map: Sequence[int],
    original_classes: Sequence[int] | None = None,
) -> AccuracyReport:
    """Score precomputed logits; column j predicts label ``class_map[j]``.

    Labels in *original_classes* count towards Ori, every other mapped label
    towards Tar. Avg is pooled over all samples, the macro average is the mean
    of the per-class accuracies.

    Raises:
        ContractError: a label has no output column.
    """
    class_map = [int(c) for c in class_map]
    present = sorted({int(y) for y in np.unique(labels)})
    unmapped = [y for y in present if y not in class_map]
    if unmapped:
        raise ContractError(f"labels {unmapped} have no output column in class map {class_map}")
    if logits.shape != (labels.shape[0], len(class_map)):
        raise ContractError(f"logits {logits.shape} for {labels.shape[0]} samples and {len(class_map)} classes")

    predicted = np.asarray(class_map)[np.argmax(logits, axis=1)] if labels.size else labels
    hits = predicted == labels
    original = set(class_map if original_classes is None else (int(c) for c in original_classes))
    is_ori = np.isin(labels, sorted(original))

    per_class: dict[str, float] = {}
    counts: dict[str, int] = {}
    for label in present:
        rows = labels == label
        counts[str(label)] = int(rows.sum())
        per_class[str(label)] = float(hits[rows].mean())

    return AccuracyReport(
        ori_acc=_mean_or_none(hits[is_ori]),
        tar_acc=_mean_or_none(hits[~is_ori]),
        avg_acc=_mean_or_none(hits),
        macro_avg_acc=float(np.mean(list(per_class.values()))) if per_class else None,
        ori_count=int(is_ori.sum()),
        tar_count=int((~is_ori).sum()),
        per_class=per_class,
        counts=counts,
    )


def accuracy(
    model: LogitModel,
    dataset: LabeledDataset,
    class_map: Sequence[int],
    original_classes: Sequence[int] | None = None,
    batch_size: int = 500,
) -> AccuracyReport:
    """Top-1 accuracy of *model* on *dataset* (labels are original digit labels)."""
    logits = model.predict_logits(dataset.images, batch_size=batch_size)
    return accuracy_from_logits(logits, dataset.labels, class_map, original_classes)


def direct_ensemble_accuracy(
    target: NetworkModel,
    source: NetworkModel,
    cloned_classes: Sequence[int],
    dataset: LabeledDataset,
    batch_size: int = 500,
) -> AccuracyReport:
    """Concatenate target logits with the source's cloned-class logits and take the argmax."""
    columns = source.class_columns(cloned_classes)
    logits = np.hstack(
        [
            target.predict_logits(dataset.images, batch_size=batch_size),
            source.predict_logits(dataset.images, batch_size=batch_size)[:, columns],
        ]
    )
    return accuracy_from_logits(logits, dataset.labels, list(target.classes) + list(cloned_classes), target.classes)
