"""Shared fixtures: toy networks, synthetic digits and IDX writers."""

from __future__ import annotations

import struct
import sys
from pathlib import Path

import numpy as np
import pytest

# ---------------------------------------------------------------------------
# Path Setup: make the core packages importable without an install
# ---------------------------------------------------------------------------

CORE_DIR = Path(__file__).parent.parent / "core"


def pytest_configure(config):
    """Add core/ to sys.path for test imports."""
    str_path = str(CORE_DIR)
    if str_path not in sys.path:
        sys.path.insert(0, str_path)


@pytest.fixture(autouse=True)
def _reset_structlog():
    """Drop structlog config bound to a per-test captured stream once the test ends."""
    yield
    import structlog

    structlog.reset_defaults()


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

TOY_SHAPE = (1, 8, 8)


def synthetic_digits(count_per_class: int, classes: list[int], seed: int = 0, side: int = 8):
    """Images in [0, 1] where class c lights up its own 2x2 cell plus noise."""
    from digits.dataset import LabeledDataset

    rng = np.random.default_rng(seed)
    images, labels = [], []
    for c in classes:
        for _ in range(count_per_class):
            img = rng.uniform(0.0, 0.2, size=(side, side))
            r, k = divmod(c, 4)
            img[2 * r:2 * r + 2, 2 * k:2 * k + 2] = rng.uniform(0.8, 1.0, size=(2, 2))
            images.append(img)
            labels.append(c)
    order = rng.permutation(len(labels))
    stacked = np.stack(images)[order][:, None, :, :]
    return LabeledDataset(images=stacked, labels=np.asarray(labels, dtype=np.int64)[order])


def write_idx_images(path: Path, images: np.ndarray) -> None:
    count, rows, cols = images.shape
    path.write_bytes(struct.pack(">IIII", 0x00000803, count, rows, cols) + images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    path.write_bytes(struct.pack(">II", 0x00000801, labels.size) + labels.astype(np.uint8).tobytes())


def write_fake_mnist(directory: Path, train_per_class: int = 12, test_per_class: int = 6, side: int = 8) -> Path:
    """Four IDX files of side x side synthetic digits 0..9 under *directory*."""
    directory.mkdir(parents=True, exist_ok=True)
    for split, per_class, seed, stems in (
        ("train", train_per_class, 0, ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")),
        ("test", test_per_class, 1, ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")),
    ):
        ds = synthetic_digits(per_class, list(range(10)), seed=seed, side=side)
        write_idx_images(directory / stems[0], np.rint(ds.images[:, 0] * 255.0))
        write_idx_labels(directory / stems[1], ds.labels)
    return directory


# ---------------------------------------------------------------------------
# Toy networks
# ---------------------------------------------------------------------------


@pytest.fixture
def toy_target():
    """Frozen mlp on 8x8 inputs covering classes 0..2."""
    from nets.zoo import build_mlp

    return build_mlp(3, 0, classes=[0, 1, 2], input_shape=TOY_SHAPE, hidden=(12, 8)).freeze()


@pytest.fixture
def toy_source():
    """Frozen mlp on 8x8 inputs covering classes 3..6."""
    from nets.zoo import build_mlp

    return build_mlp(4, 1, classes=[3, 4, 5, 6], input_shape=TOY_SHAPE, hidden=(10, 9)).freeze()


@pytest.fixture
def toy_images() -> np.ndarray:
    return np.random.default_rng(7).uniform(0.0, 1.0, size=(6, *TOY_SHAPE))


@pytest.fixture
def toy_dataset():
    return synthetic_digits(4, list(range(10)), seed=3)


@pytest.fixture
def fake_mnist_dir(tmp_path: Path) -> Path:
    return write_fake_mnist(tmp_path / "mnist")


@pytest.fixture
def toy_config():
    """RunConfig sized for the toy mlps and the 8x8 synthetic digits."""
    from utils.run_config import RunConfig

    return RunConfig(
        target_classes=[0, 1, 2],
        source_classes=[3, 4, 5, 6],
        cloned_classes=[4],
        target_arch="mlp",
        source_arch="mlp",
        data_fraction=0.5,
        num_masks=8,
        heldout_masks=4,
        grid_rows=2,
        grid_cols=2,
        mask_steps=3,
        mask_batch=4,
        epochs=1,
        batch_size=4,
        lr=0.01,
        eval_batch=16,
        similarity_anchors=3,
    )


@pytest.fixture
def make_digits():
    """Factory for synthetic labeled digits: ``make_digits(count_per_class, classes, seed)``."""
    return synthetic_digits


@pytest.fixture
def make_fake_mnist(tmp_path: Path):
    """Factory writing fake MNIST IDX files under tmp_path: ``make_fake_mnist(train, test, side)``."""

    def _make(train_per_class: int, test_per_class: int, side: int = 28) -> Path:
        return write_fake_mnist(tmp_path / f"mnist-{side}", train_per_class, test_per_class, side=side)

    return _make
