"""Blocked classifier with masked and split forward passes.

Masks multiply a block's OUTPUT channels (conv) or units (dense). The head is
never masked. ``forward_prefix`` runs blocks [0, R) and ``forward_suffix`` runs
blocks [R, L); their composition equals the unmasked forward up to the head.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor, no_grad
from contracts.errors import ContractError, ShapeError
from nets.layers import Block, Dense

MaskInput = Tensor | np.ndarray | None


@dataclass(frozen=True)
class CheckpointRef:
    """Where a network was loaded from: file basename, FNV-1a digest and byte size."""

    name: str
    digest: str
    size: int


def _as_mask(mask: MaskInput) -> Tensor | None:
    if mask is None or isinstance(mask, Tensor):
        return mask
    return Tensor(np.asarray(mask, dtype=np.float64))


def apply_mask(features: Tensor, mask: Tensor, block_index: int) -> Tensor:
    """Scale each output channel/unit of *features* by the matching mask entry."""
    width = features.dims[1]
    if mask.dims != (width,):
        raise ShapeError("mask", f"block {block_index} expects a mask of length {width}, got {mask.dims}")
    view = (1, width, 1, 1) if features.ndim == 4 else (1, width)
    return ops.mul(features, ops.reshape(mask, view))


@dataclass
class NetworkModel:
    """Blocks, a dense head and the metadata needed to rebuild the skeleton."""

    blocks: list[Block]
    head: Dense
    arch: str
    arch_params: dict[str, Any] = field(default_factory=dict)
    input_shape: tuple[int, ...] = (1, 28, 28)
    classes: list[int] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)
    origin: CheckpointRef | None = None
    _splice_dims: list[tuple[int, ...]] = field(init=False, repr=False, default_factory=list)

    def __post_init__(self) -> None:
        if len(self.blocks) < 2:
            raise ContractError(f"a network needs at least 2 blocks, got {len(self.blocks)}")
        if not self.classes:
            self.classes = list(range(self.num_classes))
        if len(self.classes) != self.num_classes:
            raise ContractError(f"{len(self.classes)} class labels for {self.num_classes} outputs")
        with no_grad():
            x = Tensor(np.zeros((1, *self.input_shape)))
            self._splice_dims = [x.dims[1:]]
            for block in self.blocks:
                x = block(x)
                self._splice_dims.append(x.dims[1:])
        if int(np.prod(self._splice_dims[-1])) != self.head.weight.dims[1]:
            expected = self.head.weight.dims[1]
            raise ShapeError("head", f"blocks produce {self._splice_dims[-1]} but head expects {expected}")

    # -- structure ----------------------------------------------------------

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def num_classes(self) -> int:
        return self.head.weight.dims[0]

    @property
    def feature_width(self) -> int:
        """Width of the pre-head feature vector."""
        return self.head.weight.dims[1]

    @property
    def mask_widths(self) -> list[int]:
        return [b.maskable_width for b in self.blocks]

    def block_input_dims(self, position: int) -> tuple[int, ...]:
        """Per-sample dims entering block *position* (the splice dims at R)."""
        self._check_position(position)
        return self._splice_dims[position]

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        for i, block in enumerate(self.blocks):
            yield from block.named_parameters(f"blocks.{i}")
        yield "head.weight", self.head.weight
        yield "head.bias", self.head.bias

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.named_parameters()}

    def snapshot(self) -> dict[str, np.ndarray]:
        """Copies of every parameter, for bit-exact before/after audits."""
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def requires_grad_(self, flag: bool) -> NetworkModel:
        for _, t in self.named_parameters():
            t.requires_grad = flag
            t.grad = None
        return self

    def freeze(self) -> NetworkModel:
        return self.requires_grad_(False)

    def zero_grad(self) -> None:
        for _, t in self.named_parameters():
            t.grad = None

    # -- forward passes -----------------------------------------------------

    def _check_position(self, position: int) -> None:
        if not 0 <= position < self.num_blocks:
            raise ContractError(f"position {position} outside 0..{self.num_blocks - 1}")

    def _check_masks(self, masks: Sequence[MaskInput] | None) -> list[Tensor | None]:
        if masks is None:
            return [None] * self.num_blocks
        if len(masks) != self.num_blocks:
            raise ShapeError("mask", f"expected {self.num_blocks} block masks, got {len(masks)}")
        return [_as_mask(m) for m in masks]

    def _run_blocks(self, x: Tensor, start: int, stop: int, masks: list[Tensor | None]) -> Tensor:
        for i in range(start, stop):
            x = self.blocks[i](x)
            if masks[i] is not None:
                x = apply_mask(x, masks[i], i)
        return x

    def forward_prefix(self, x: Tensor, position: int) -> Tensor:
        """Blocks [0, position), unmasked; *position* is an insertion position in 0..L-1."""
        self._check_position(position)
        return self._run_blocks(x, 0, position, [None] * self.num_blocks)

    def forward_suffix(self, features: Tensor, position: int, masks: Sequence[MaskInput] | None = None) -> Tensor:
        """Blocks [position, L) with optional masks; returns pre-head features.

        *masks* holds one entry per block (absolute indexing); entries for blocks
        before *position* are ignored.
        """
        expected = self.block_input_dims(position)
        if features.dims[1:] != expected:
            raise ShapeError("splice", f"block {position} expects {expected}, got {features.dims[1:]}")
        return ops.flatten(self._run_blocks(features, position, self.num_blocks, self._check_masks(masks)))

    def features(self, x: Tensor, masks: Sequence[MaskInput] | None = None) -> Tensor:
        return ops.flatten(self._run_blocks(x, 0, self.num_blocks, self._check_masks(masks)))

    def forward(self, x: Tensor | np.ndarray, masks: Sequence[MaskInput] | None = None) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        return ops.linear(self.features(x, masks), self.head.weight, self.head.bias)

    __call__ = forward

    def predict_logits(
        self,
        images: np.ndarray,
        batch_size: int = 500,
        masks: Sequence[MaskInput] | None = None,
    ) -> np.ndarray:
        """Inference-only logits for an (N, C, H, W) array, batched."""
        outputs = []
        with no_grad():
            for start in range(0, images.shape[0], batch_size):
                outputs.append(self.forward(Tensor(images[start:start + batch_size]), masks).data)
        return np.concatenate(outputs) if outputs else np.zeros((0, self.num_classes))

    def class_columns(self, labels: Sequence[int]) -> list[int]:
        """Output columns of the given original labels."""
        missing = [c for c in labels if c not in self.classes]
        if missing:
            raise ContractError(f"classes {missing} are not outputs of this {self.arch} network ({self.classes})")
        return [self.classes.index(c) for c in labels]

    def describe(self) -> dict[str, Any]:
        return {
            "arch": self.arch,
            "arch_params": self.arch_params,
            "classes": self.classes,
            "blocks": self.num_blocks,
            "mask_widths": self.mask_widths,
            "parameters": int(sum(t.size for t in self.parameters())),
        }
