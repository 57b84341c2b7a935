"""The cloned model: frozen target with the masked source suffix attached at R.

    u      = target.prefix(x, R)
    trunk  = target.suffix(u, R)
    branch = source.suffix(adapter(u), R, masks)
    logits = head(trunk, branch)        # [old classes..., cloned classes...]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from autodiff.tensor import Tensor, no_grad
from contracts.errors import ContractError
from graft.adapter import Adapter
from graft.head import ExtendedHead
from localize.masks import MaskSet
from nets.network import NetworkModel


@dataclass
class ClonedModel:
    target: NetworkModel
    source: NetworkModel
    masks: MaskSet
    position: int
    adapter: Adapter
    head: ExtendedHead
    cloned_classes: list[int]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0 <= self.position < self.source.num_blocks or self.position >= self.target.num_blocks:
            raise ContractError(f"position {self.position} outside 0..{self.source.num_blocks - 1}")
        overlap = set(self.target.classes) & set(self.cloned_classes)
        if overlap:
            raise ContractError(f"cloned classes {sorted(overlap)} already belong to the target")
        if self.head.num_old != self.target.num_classes or self.head.num_new != len(self.cloned_classes):
            raise ContractError(
                f"head has {self.head.num_old}+{self.head.num_new} outputs for "
                f"{self.target.num_classes}+{len(self.cloned_classes)} classes"
            )
        self.source.class_columns(self.cloned_classes)

    # -- class maps -----------------------------------------------------------

    @property
    def class_map(self) -> list[int]:
        """Original digit label of every output column."""
        return list(self.target.classes) + list(self.cloned_classes)

    @property
    def old_columns(self) -> list[int]:
        return list(range(self.target.num_classes))

    @property
    def new_columns(self) -> list[int]:
        n = self.target.num_classes
        return list(range(n, n + len(self.cloned_classes)))

    @property
    def num_outputs(self) -> int:
        return self.target.num_classes + len(self.cloned_classes)

    # -- forward ----------------------------------------------------------------

    def forward(self, x: Tensor | np.ndarray, mode: str = "binary") -> Tensor:
        return cloned_forward(self, x, mode)

    __call__ = forward

    def predict_logits(self, images: np.ndarray, batch_size: int = 500, mode: str = "binary") -> np.ndarray:
        outputs = []
        with no_grad():
            for start in range(0, images.shape[0], batch_size):
                outputs.append(cloned_forward(self, Tensor(images[start:start + batch_size]), mode).data)
        return np.concatenate(outputs) if outputs else np.zeros((0, self.num_outputs))

    def trainable_parameters(self, include_masks: bool = True) -> list[Tensor]:
        params = self.adapter.parameters() + self.head.parameters()
        if include_masks:
            params += self.masks.trainable()
        return params


def cloned_forward(c: ClonedModel, x: Tensor | np.ndarray, mode: str = "binary") -> Tensor:
    """Logits over old then cloned classes. *mode* selects soft or binarized masks."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    u = c.target.forward_prefix(x, c.position)
    trunk = c.target.forward_suffix(u, c.position)
    branch = c.source.forward_suffix(c.adapter(u), c.position, c.masks.forward_masks(mode, c.position))
    return c.head(trunk, branch)


def logits_by_label(c: ClonedModel, logits: np.ndarray, labels: Sequence[int]) -> np.ndarray:
    """Columns of *logits* for the given original labels."""
    class_map = c.class_map
    return logits[:, [class_map.index(label) for label in labels]]
