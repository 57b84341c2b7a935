"""Extended head over concat(trunk features, branch features).

The weight matrix is kept in four blocks so the old-class logits at
initialization are computed with exactly the target head's arithmetic:

    old = trunk @ W_old_trunk.T + b_old + branch @ W_old_branch.T   (W_old_branch = 0)
    new = trunk @ W_new_trunk.T + b_new + branch @ W_new_branch.T   (W_new_trunk = 0)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor
from contracts.errors import ShapeError
from nets.layers import Dense


@dataclass
class ExtendedHead:
    old_trunk: Tensor
    old_branch: Tensor
    old_bias: Tensor
    new_trunk: Tensor
    new_branch: Tensor
    new_bias: Tensor

    @property
    def trunk_width(self) -> int:
        return self.old_trunk.dims[1]

    @property
    def branch_width(self) -> int:
        return self.old_branch.dims[1]

    @property
    def num_old(self) -> int:
        return self.old_trunk.dims[0]

    @property
    def num_new(self) -> int:
        return self.new_trunk.dims[0]

    def __call__(self, trunk: Tensor, branch: Tensor) -> Tensor:
        if trunk.dims[1] != self.trunk_width or branch.dims[1] != self.branch_width:
            raise ShapeError(
                "extended_head",
                f"inputs {trunk.dims[1]}+{branch.dims[1]}, expected {self.trunk_width}+{self.branch_width}",
            )
        old = ops.add(ops.linear(trunk, self.old_trunk, self.old_bias), ops.linear(branch, self.old_branch))
        new = ops.add(ops.linear(trunk, self.new_trunk, self.new_bias), ops.linear(branch, self.new_branch))
        return ops.concat([old, new], axis=1)

    def parameters(self) -> list[Tensor]:
        return [self.old_trunk, self.old_branch, self.old_bias, self.new_trunk, self.new_branch, self.new_bias]

    def packet_tensors(self) -> dict[str, np.ndarray]:
        weight, bias = self.merged()
        return {"head.weight": weight, "head.bias": bias}

    def merged(self) -> tuple[np.ndarray, np.ndarray]:
        """Single (old+new, trunk+branch) weight matrix and bias vector."""
        top = np.hstack([self.old_trunk.data, self.old_branch.data])
        bottom = np.hstack([self.new_trunk.data, self.new_branch.data])
        return np.vstack([top, bottom]), np.concatenate([self.old_bias.data, self.new_bias.data])


def build_extended_head(
    target_head: Dense,
    branch_width: int,
    num_new: int,
    rng: np.random.Generator,
    init_std: float = 1e-2,
) -> ExtendedHead:
    """Old rows copy the target head (zero on the branch); new rows are small random on the branch."""
    num_old, trunk_width = target_head.weight.dims

    def param(data: np.ndarray, name: str) -> Tensor:
        return Tensor(data, requires_grad=True, name=name)

    return ExtendedHead(
        old_trunk=param(target_head.weight.data.copy(), "head.old_trunk"),
        old_branch=param(np.zeros((num_old, branch_width)), "head.old_branch"),
        old_bias=param(target_head.bias.data.copy(), "head.old_bias"),
        new_trunk=param(np.zeros((num_new, trunk_width)), "head.new_trunk"),
        new_branch=param(rng.normal(0.0, init_std, size=(num_new, branch_width)), "head.new_branch"),
        new_bias=param(np.zeros(num_new), "head.new_bias"),
    )


def head_from_tensors(weight: np.ndarray, bias: np.ndarray, num_old: int, trunk_width: int) -> ExtendedHead:
    """Split a merged head matrix back into its four blocks."""
    if weight.ndim != 2 or bias.shape != (weight.shape[0],) or not 0 < num_old < weight.shape[0]:
        detail = f"cannot split weight {weight.shape} / bias {bias.shape} at {num_old} old rows"
        raise ShapeError("extended_head", detail)
    return ExtendedHead(
        old_trunk=Tensor(weight[:num_old, :trunk_width].copy()),
        old_branch=Tensor(weight[:num_old, trunk_width:].copy()),
        old_bias=Tensor(bias[:num_old].copy()),
        new_trunk=Tensor(weight[num_old:, :trunk_width].copy()),
        new_branch=Tensor(weight[num_old:, trunk_width:].copy()),
        new_bias=Tensor(bias[num_old:].copy()),
    )
