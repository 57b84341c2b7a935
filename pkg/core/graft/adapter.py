"""Adapter from target trunk features at R to the source branch input at R.

Feature-map splices use a 1x1 convolution plus ReLU, followed by adaptive
average pooling when the spatial extents differ. Flat splices use a dense map
plus ReLU (a feature map feeding a flat branch input is flattened first).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor
from contracts.errors import ShapeError
from nets.layers import kaiming_uniform


@dataclass
class Adapter:
    kind: str  # "conv" | "dense"
    weight: Tensor
    bias: Tensor
    out_dims: tuple[int, ...]

    def __call__(self, u: Tensor) -> Tensor:
        if self.kind == "conv":
            x = ops.relu(ops.conv2d(u, self.weight, self.bias))
            if x.dims[2:] != self.out_dims[1:]:
                x = ops.adaptive_avgpool2d(x, self.out_dims[1:])
        else:
            x = ops.relu(ops.linear(ops.flatten(u), self.weight, self.bias))
        if x.dims[1:] != self.out_dims:
            raise ShapeError("adapter", f"produced {x.dims[1:]}, branch expects {self.out_dims}")
        return x

    def packet_tensors(self) -> dict[str, np.ndarray]:
        return {"adapter.weight": self.weight.data, "adapter.bias": self.bias.data}

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def spec(self) -> dict[str, object]:
        return {"kind": self.kind, "out_dims": list(self.out_dims)}


def build_adapter(
    in_dims: tuple[int, ...],
    out_dims: tuple[int, ...],
    rng: np.random.Generator,
) -> Adapter:
    """Fresh adapter; square maps start at the identity, others Kaiming-uniform.

    Raises:
        ShapeError: the splice cannot be reconciled (flat trunk into a feature-map
            branch, or a trunk map smaller than the branch map).
    """
    if len(out_dims) == 3:
        if len(in_dims) != 3:
            raise ShapeError("adapter", f"flat trunk {in_dims} cannot feed feature-map branch {out_dims}")
        c_in, c_out = in_dims[0], out_dims[0]
        if in_dims[1] < out_dims[1] or in_dims[2] < out_dims[2]:
            raise ShapeError("adapter", f"trunk extents {in_dims[1:]} smaller than branch extents {out_dims[1:]}")
        if c_in == c_out:
            weight = np.eye(c_out).reshape(c_out, c_in, 1, 1)
        else:
            weight = kaiming_uniform(rng, (c_out, c_in, 1, 1), c_in)
        kind = "conv"
    else:
        n_in, n_out = int(np.prod(in_dims)), int(np.prod(out_dims))
        weight = np.eye(n_out) if n_in == n_out else kaiming_uniform(rng, (n_out, n_in), n_in)
        kind = "dense"
    return Adapter(
        kind=kind,
        weight=Tensor(weight, requires_grad=True, name="adapter.weight"),
        bias=Tensor(np.zeros(out_dims[0]), requires_grad=True, name="adapter.bias"),
        out_dims=tuple(out_dims),
    )


def adapter_from_tensors(spec: dict[str, object], weight: np.ndarray, bias: np.ndarray) -> Adapter:
    return Adapter(
        kind=str(spec["kind"]),
        weight=Tensor(weight, name="adapter.weight"),
        bias=Tensor(bias, name="adapter.bias"),
        out_dims=tuple(int(d) for d in spec["out_dims"]),  # type: ignore[union-attr]
    )
