"""Per-block selection masks.

Soft masks are ``sigmoid(logits)``; the binarized view keeps exactly ``budgets[l]``
entries per block (top values, ties to the lowest index) and is stored as sorted
index lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor
from contracts.errors import ContractError

# sigmoid(40.0) == 1.0 exactly in float64
SATURATED_LOGIT = 40.0


def default_budgets(widths: Sequence[int], fraction: float) -> list[int]:
    """ceil(fraction * width) per block, clamped to [1, width]."""
    return [min(w, max(1, int(np.ceil(fraction * w - 1e-12)))) for w in widths]


@dataclass
class MaskSet:
    logits: list[Tensor]
    budgets: list[int]
    active_from: int = 0
    selected: list[list[int]] | None = None
    history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.budgets) != len(self.logits):
            raise ContractError(f"{len(self.budgets)} budgets for {len(self.logits)} blocks")
        for i, (budget, width) in enumerate(zip(self.budgets, self.widths)):
            if not 1 <= budget <= width:
                raise ContractError(f"budget {budget} for block {i} outside 1..{width}")
        if self.selected is not None:
            for i, (chosen, budget) in enumerate(zip(self.selected, self.budgets)):
                if len(chosen) != budget:
                    raise ContractError(f"block {i} selects {len(chosen)} entries, budget is {budget}")

    @classmethod
    def initial(cls, widths: Sequence[int], budgets: Sequence[int], init_logit: float = 0.0) -> MaskSet:
        logits = [Tensor(np.full(w, init_logit), requires_grad=True, name=f"mask.{i}") for i, w in enumerate(widths)]
        return cls(logits=logits, budgets=list(budgets))

    @classmethod
    def from_soft(cls, values: Sequence[np.ndarray], budgets: Sequence[int]) -> MaskSet:
        """Build from soft values in (0, 1) (or exact 0/1, mapped to saturated logits)."""
        logits = []
        for i, v in enumerate(values):
            v = np.asarray(v, dtype=np.float64)
            with np.errstate(divide="ignore"):
                raw = np.log(v) - np.log1p(-v)
            logits.append(Tensor(np.clip(raw, -SATURATED_LOGIT, SATURATED_LOGIT), requires_grad=True, name=f"mask.{i}"))
        return cls(logits=logits, budgets=list(budgets))

    @classmethod
    def from_selected(cls, widths: Sequence[int], selected: Sequence[Sequence[int]], active_from: int = 0) -> MaskSet:
        """Binary mask set from per-block index lists (the packet representation)."""
        logits = []
        for i, (w, chosen) in enumerate(zip(widths, selected)):
            raw = np.full(w, -SATURATED_LOGIT)
            raw[list(chosen)] = SATURATED_LOGIT
            logits.append(Tensor(raw, requires_grad=False, name=f"mask.{i}"))
        return cls(
            logits=logits,
            budgets=[len(c) for c in selected],
            active_from=active_from,
            selected=[sorted(int(j) for j in c) for c in selected],
        )

    @classmethod
    def full(cls, widths: Sequence[int], active_from: int = 0) -> MaskSet:
        """Every entry selected (full budget)."""
        return cls.from_selected(widths, [list(range(w)) for w in widths], active_from)

    # -- views --------------------------------------------------------------

    @property
    def widths(self) -> list[int]:
        return [t.dims[0] for t in self.logits]

    @property
    def num_blocks(self) -> int:
        return len(self.logits)

    @property
    def is_binary(self) -> bool:
        return self.selected is not None

    def soft_tensors(self) -> list[Tensor]:
        return [ops.sigmoid(t) for t in self.logits]

    def soft_values(self) -> list[np.ndarray]:
        return [0.5 * (1.0 + np.tanh(0.5 * t.data)) for t in self.logits]

    def binary_values(self) -> list[np.ndarray]:
        if self.selected is None:
            raise ContractError("mask set is not binarized")
        out = []
        for w, chosen in zip(self.widths, self.selected):
            v = np.zeros(w)
            v[chosen] = 1.0
            out.append(v)
        return out

    def forward_masks(self, mode: str = "binary", active_from: int | None = None) -> list[Tensor | None]:
        """Per-block mask inputs for a network forward; blocks before *active_from* stay unmasked."""
        start = self.active_from if active_from is None else active_from
        if mode == "soft":
            values: list[Tensor] = self.soft_tensors()
        elif mode == "binary":
            values = [Tensor(v) for v in self.binary_values()]
        else:
            raise ContractError(f"unknown mask mode {mode!r}")
        return [None if i < start else v for i, v in enumerate(values)]

    def trainable(self) -> list[Tensor]:
        return [t for t in self.logits if t.requires_grad]

    def copy(self, trainable: bool | None = None) -> MaskSet:
        flag = (lambda t: t.requires_grad) if trainable is None else (lambda t: trainable)
        return MaskSet(
            logits=[Tensor(t.data.copy(), requires_grad=flag(t), name=t.name) for t in self.logits],
            budgets=list(self.budgets),
            active_from=self.active_from,
            selected=None if self.selected is None else [list(c) for c in self.selected],
            history=list(self.history),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "budgets": self.budgets,
            "widths": self.widths,
            "active_from": self.active_from,
            "soft": [v.tolist() for v in self.soft_values()],
            "selected": self.selected,
        }


def binarize_topk(masks: MaskSet) -> MaskSet:
    """Keep the ``budget`` largest entries per block; ties go to the lowest index.

    Selection depends only on the soft values, so binarizing twice selects the same entries.
    """
    values = masks.soft_values()
    selected = []
    for v, budget in zip(values, masks.budgets):
        order = np.lexsort((np.arange(v.size), -v))
        selected.append(sorted(int(j) for j in order[:budget]))
    result = masks.copy()
    result.selected = selected
    return result
