"""SGD with momentum."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from autodiff.tensor import Tensor
from contracts.errors import ContractError


@dataclass
class SgdState:
    """Learning rate, momentum and one velocity buffer per parameter (keyed by identity)."""

    learning_rate: float
    momentum: float = 0.0
    velocity: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ContractError(f"learning rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ContractError(f"momentum must lie in [0, 1), got {self.momentum}")


def sgd_step(params: Iterable[Tensor], state: SgdState) -> None:
    """``v <- momentum * v + grad``; ``p <- p - lr * v``; grads are cleared afterwards.

    Raises:
        ContractError: a parameter has no gradient.
    """
    params = list(params)
    for p in params:
        if p.grad is None:
            raise ContractError(f"parameter {p.name or p.dims} has no gradient")
    for p in params:
        key = id(p)
        v = state.velocity.get(key)
        if v is None or v.shape != p.data.shape:
            v = np.zeros_like(p.data)
        v = state.momentum * v + p.grad
        state.velocity[key] = v
        # rebind, never write in place
        p.data = p.data - state.learning_rate * v
        p.grad = None
