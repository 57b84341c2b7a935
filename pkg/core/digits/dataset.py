"""Labeled image datasets and the class splits used for cloning.

The three cloning splits are all built with :func:`class_split`:
the target-original set (D_o), the to-be-cloned set (D_t) and the
source-rest set (D-bar_t).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from contracts.errors import DataError


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Images (N, 1, H, W) in [0, 1] with integer labels in 0..9."""

    images: np.ndarray
    labels: np.ndarray
    split: str = "train"

    def __post_init__(self) -> None:
        if self.images.ndim != 4:
            raise DataError(f"images must be (N, C, H, W), got {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise DataError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise DataError("pixel values must lie in [0, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 9):
            raise DataError("labels must lie in 0..9")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def image_shape(self) -> tuple[int, ...]:
        return tuple(self.images.shape[1:])

    @property
    def classes(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.labels))

    def class_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def select(self, indices: np.ndarray | Sequence[int]) -> LabeledDataset:
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(images=self.images[idx], labels=self.labels[idx], split=self.split)


def class_split(ds: LabeledDataset, classes: Sequence[int], remap: bool = False) -> LabeledDataset:
    """Keep items whose label is in *classes*; optionally renumber labels 0..k-1.

    Raises:
        DataError: empty class set or a class outside 0..9.
    """
    wanted = sorted(set(int(c) for c in classes))
    if not wanted:
        raise DataError("class_split needs a non-empty class set")
    if wanted[0] < 0 or wanted[-1] > 9:
        raise DataError(f"classes must lie in 0..9, got {wanted}")
    keep = np.isin(ds.labels, wanted)
    labels = ds.labels[keep]
    if remap:
        labels = remap_labels(labels, wanted)
    return LabeledDataset(images=ds.images[keep], labels=labels, split=ds.split)


def remap_labels(labels: np.ndarray, classes: Sequence[int]) -> np.ndarray:
    """Map original labels to their position in the ascending *classes* list."""
    lookup = np.full(10, -1, dtype=np.int64)
    for position, label in enumerate(sorted(classes)):
        lookup[label] = position
    mapped = lookup[labels]
    if mapped.size and mapped.min() < 0:
        raise DataError(f"labels {sorted(set(labels[mapped < 0].tolist()))} not in {sorted(classes)}")
    return mapped


def _round_half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


def subsample(ds: LabeledDataset, fraction: float, seed: int | np.random.Generator) -> LabeledDataset:
    """Stratified sample of round(fraction * n_c) items per class, shuffled by *seed*.

    Rounding is half-up.

    Raises:
        DataError: fraction outside (0, 1].
    """
    if not 0.0 < fraction <= 1.0:
        raise DataError(f"fraction must lie in (0, 1], got {fraction}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    chosen: list[np.ndarray] = []
    for label in ds.classes:
        members = np.flatnonzero(ds.labels == label)
        take = _round_half_up(fraction * members.size)
        chosen.append(members[rng.permutation(members.size)[:take]])
    picked = np.concatenate(chosen) if chosen else np.zeros(0, dtype=np.int64)
    return ds.select(picked[rng.permutation(picked.size)])


def concat(datasets: Sequence[LabeledDataset]) -> LabeledDataset:
    """Union of datasets in the given order (used to rebuild a class partition)."""
    if not datasets:
        raise DataError("concat needs at least one dataset")
    return LabeledDataset(
        images=np.concatenate([d.images for d in datasets]),
        labels=np.concatenate([d.labels for d in datasets]),
        split=datasets[0].split,
    )


def batches(
    ds: LabeledDataset,
    batch_size: int,
    rng: np.random.Generator | None = None,
) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(indices, images, labels)`` minibatches; shuffled when *rng* is given."""
    order = rng.permutation(len(ds)) if rng is not None else np.arange(len(ds))
    for start in range(0, len(ds), batch_size):
        idx = order[start:start + batch_size]
        yield idx, ds.images[idx], ds.labels[idx]
