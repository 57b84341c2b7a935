"""Parametric layers and blocks.

A block is a short sequence of layers; its last parametric layer fixes the
block's ``maskable_width`` (output channels for conv, output units for dense).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor


def kaiming_uniform(rng: np.random.Generator, dims: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=dims)


@dataclass
class Conv2d:
    """Stride-1 convolution with symmetric zero padding, optional ReLU and 2x2 max pool."""

    weight: Tensor
    bias: Tensor
    pad: int = 0
    relu: bool = True
    pool: bool = False

    kind = "conv"

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        in_channels: int,
        out_channels: int,
        kernel: int,
        pad: int = 0,
        relu: bool = True,
        pool: bool = False,
    ) -> Conv2d:
        fan_in = in_channels * kernel * kernel
        weight = kaiming_uniform(rng, (out_channels, in_channels, kernel, kernel), fan_in)
        return cls(Tensor(weight), Tensor(np.zeros(out_channels)), pad=pad, relu=relu, pool=pool)

    @property
    def out_width(self) -> int:
        return self.weight.dims[0]

    def __call__(self, x: Tensor) -> Tensor:
        x = ops.conv2d(ops.pad2d(x, self.pad), self.weight, self.bias)
        if self.relu:
            x = ops.relu(x)
        if self.pool:
            x = ops.maxpool2x2(x)
        return x

    def spec(self) -> dict[str, object]:
        return {"kind": self.kind, "pad": self.pad, "relu": self.relu, "pool": self.pool}


@dataclass
class Dense:
    """Fully connected layer; flattens (N, C, H, W) inputs first."""

    weight: Tensor
    bias: Tensor
    relu: bool = True

    kind = "dense"

    @classmethod
    def create(cls, rng: np.random.Generator, in_features: int, out_features: int, relu: bool = True) -> Dense:
        weight = kaiming_uniform(rng, (out_features, in_features), in_features)
        return cls(Tensor(weight), Tensor(np.zeros(out_features)), relu=relu)

    @property
    def out_width(self) -> int:
        return self.weight.dims[0]

    def __call__(self, x: Tensor) -> Tensor:
        x = ops.linear(ops.flatten(x), self.weight, self.bias)
        return ops.relu(x) if self.relu else x

    def spec(self) -> dict[str, object]:
        return {"kind": self.kind, "relu": self.relu}


Layer = Conv2d | Dense


@dataclass
class Block:
    layers: list[Layer] = field(default_factory=list)

    @property
    def maskable_width(self) -> int:
        return self.layers[-1].out_width

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for j, layer in enumerate(self.layers):
            yield f"{prefix}.layers.{j}.weight", layer.weight
            yield f"{prefix}.layers.{j}.bias", layer.bias
