"""Patch grids, binary patch masks and patch-wise perturbation (b . x).

A grid of ``rows x cols`` patches covers an image; interior patches are
``H // rows`` by ``W // cols`` pixels and the last row and column absorb the
remainder, so no patch is empty. A mask keeps the pixels of
patches whose bit is 1 and replaces the rest with the baseline value 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from contracts.errors import DataError, ShapeError

BASELINE = 0.0


@dataclass(frozen=True)
class PatchGrid:
    rows: int = 4
    cols: int = 4
    height: int = 28
    width: int = 28
    patch_index: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise DataError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.rows > self.height or self.cols > self.width:
            raise DataError(f"grid {self.rows}x{self.cols} finer than image {self.height}x{self.width}")
        ph, pw = self.patch_extent
        r = np.minimum(np.arange(self.height) // ph, self.rows - 1)
        c = np.minimum(np.arange(self.width) // pw, self.cols - 1)
        object.__setattr__(self, "patch_index", r[:, None] * self.cols + c[None, :])

    @property
    def num_patches(self) -> int:
        return self.rows * self.cols

    @property
    def patch_extent(self) -> tuple[int, int]:
        """Interior patch extent; border patches may be larger."""
        return self.height // self.rows, self.width // self.cols

    def pixel_mask(self, bits: np.ndarray) -> np.ndarray:
        """(H, W) boolean keep-map for one mask, or (K, H, W) for a (K, P) stack."""
        bits = np.asarray(bits)
        if bits.shape[-1] != self.num_patches:
            raise ShapeError("perturb", f"mask length {bits.shape[-1]} != patch count {self.num_patches}")
        return bits[..., self.patch_index].astype(bool)

    def to_dict(self) -> dict[str, int]:
        return {"rows": self.rows, "cols": self.cols, "height": self.height, "width": self.width}


@dataclass(frozen=True, eq=False)
class PatchMask:
    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or not np.isin(bits, (0, 1)).all():
            raise DataError("patch mask must be a 1-d vector of 0/1 entries")
        object.__setattr__(self, "bits", bits.astype(np.uint8))

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def density(self) -> float:
        return float(self.bits.mean()) if self.bits.size else 0.0


def gen_masks(num_patches: int, count: int, seed: int | np.random.Generator) -> list[PatchMask]:
    """All-ones mask first, then ``count - 1`` masks with Bernoulli(0.5) bits."""
    if num_patches < 1 or count < 1:
        raise DataError(f"need num_patches >= 1 and count >= 1, got {num_patches}, {count}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    rest = rng.integers(0, 2, size=(count - 1, num_patches), dtype=np.uint8)
    return [PatchMask(np.ones(num_patches, dtype=np.uint8))] + [PatchMask(row) for row in rest]


def stack_masks(masks: Sequence[PatchMask]) -> np.ndarray:
    """(K, P) float matrix of mask bits."""
    return np.stack([m.bits for m in masks]).astype(np.float64)


def perturb(x: np.ndarray, b: PatchMask | np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Keep patches with bit 1, set the others to the baseline."""
    bits = b.bits if isinstance(b, PatchMask) else np.asarray(b)
    if x.shape[-2:] != (grid.height, grid.width):
        raise ShapeError("perturb", f"image extents {x.shape[-2:]} vs grid {grid.height}x{grid.width}")
    return np.where(grid.pixel_mask(bits), x, BASELINE)


def perturb_batch(images: np.ndarray, bits: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Row-wise perturbation: images (N, C, H, W), bits (N, P)."""
    if images.shape[-2:] != (grid.height, grid.width):
        raise ShapeError("perturb_batch", f"image extents {images.shape[-2:]} vs grid {grid.height}x{grid.width}")
    if bits.ndim != 2 or bits.shape[0] != images.shape[0]:
        raise ShapeError("perturb_batch", f"bits {bits.shape} for {images.shape[0]} images")
    keep = grid.pixel_mask(bits)[:, None, :, :]
    return np.where(keep, images, BASELINE)
