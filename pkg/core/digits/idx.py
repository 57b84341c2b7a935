"""MNIST IDX ingestion.

Reads the four standard files (optionally gzip-compressed) from one directory.
Images use magic 0x00000803 with three big-endian u32 extents, labels magic
0x00000801 with one.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from contracts.errors import DataError, IdxFormatError
from digits.dataset import LabeledDataset

logger = structlog.get_logger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class MnistData:
    train: LabeledDataset
    test: LabeledDataset


def _resolve(directory: Path, stem: str) -> Path:
    for candidate in (stem, stem.replace("-idx", ".idx"), f"{stem}.gz", f"{stem.replace('-idx', '.idx')}.gz"):
        path = directory / candidate
        if path.is_file():
            return path
    raise DataError(f"missing MNIST file {stem} (or {stem}.gz) in {directory}")


def _read_bytes(path: Path) -> bytes:
    if path.suffix == ".gz":
        try:
            return gzip.decompress(path.read_bytes())
        except (OSError, EOFError) as exc:
            raise IdxFormatError(f"{path}: corrupt gzip stream ({exc})") from exc
    return path.read_bytes()


def read_idx_images(path: str | Path) -> np.ndarray:
    """Return uint8 images of shape (N, rows, cols)."""
    path = Path(path)
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise IdxFormatError(f"{path}: truncated header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"{path}: bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
    expected = count * rows * cols
    if len(raw) - 16 < expected:
        raise IdxFormatError(f"{path}: truncated payload ({len(raw) - 16} of {expected} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=expected, offset=16).reshape(count, rows, cols)


def read_idx_labels(path: str | Path) -> np.ndarray:
    path = Path(path)
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise IdxFormatError(f"{path}: truncated header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"{path}: bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
    if len(raw) - 8 < count:
        raise IdxFormatError(f"{path}: truncated payload ({len(raw) - 8} of {count} labels)")
    labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        raise IdxFormatError(f"{path}: label {int(labels.max())} outside 0..9")
    return labels


def load_split(directory: str | Path, split: str) -> LabeledDataset:
    directory = Path(directory)
    image_stem, label_stem = _FILES[split]
    images = read_idx_images(_resolve(directory, image_stem))
    labels = read_idx_labels(_resolve(directory, label_stem))
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{split}: {images.shape[0]} images but {labels.shape[0]} labels")
    pixels = (images.astype(np.float64) / 255.0)[:, None, :, :]
    return LabeledDataset(images=pixels, labels=labels, split=split)


def load_mnist(path: str | Path) -> MnistData:
    """Load train and test splits, pixels scaled by 1/255.

    Raises:
        DataError: a file is missing.
        IdxFormatError: bad magic, truncation or image/label count mismatch.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise DataError(f"MNIST directory not found: {directory}")
    data = MnistData(train=load_split(directory, "train"), test=load_split(directory, "test"))
    logger.info("digits.mnist.loaded", path=str(directory), train=len(data.train), test=len(data.test))
    return data
