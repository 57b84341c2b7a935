"""Architecture builders and the registry checkpoints are rebuilt from.

=========  ===============================================================
lenet      conv(1->6, 5x5, pad 2)+relu+pool | conv(6->16, 5x5)+relu+pool |
           fc(400->120)+relu, fc(120->84)+relu | head fc(84->C)
plaincnn   conv(1->8, 3x3, pad 1)+relu+pool | conv(8->24, 3x3, pad 1)+relu+pool |
           fc(1176->84)+relu | head fc(84->C)
mlp        fc(in->h0)+relu | fc(h0->h1)+relu | ... | head fc(h_last->C)
=========  ===============================================================
"""

from __future__ import annotations

from typing import Any, Callable, Sequence

import numpy as np

from contracts.errors import ConfigError
from nets.layers import Block, Conv2d, Dense
from nets.network import NetworkModel

Seed = int | np.random.Generator


def _rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _check_classes(num_classes: int) -> None:
    if num_classes < 2:
        raise ConfigError(f"num_classes must be >= 2, got {num_classes}")


def build_lenet(num_classes: int, seed: Seed = 0, classes: Sequence[int] | None = None) -> NetworkModel:
    _check_classes(num_classes)
    rng = _rng(seed)
    blocks = [
        Block([Conv2d.create(rng, 1, 6, 5, pad=2, pool=True)]),
        Block([Conv2d.create(rng, 6, 16, 5, pool=True)]),
        Block([Dense.create(rng, 16 * 5 * 5, 120), Dense.create(rng, 120, 84)]),
    ]
    head = Dense.create(rng, 84, num_classes, relu=False)
    return NetworkModel(blocks, head, arch="lenet", classes=list(classes or range(num_classes)))


def build_plaincnn(num_classes: int, seed: Seed = 0, classes: Sequence[int] | None = None) -> NetworkModel:
    _check_classes(num_classes)
    rng = _rng(seed)
    blocks = [
        Block([Conv2d.create(rng, 1, 8, 3, pad=1, pool=True)]),
        Block([Conv2d.create(rng, 8, 24, 3, pad=1, pool=True)]),
        Block([Dense.create(rng, 24 * 7 * 7, 84)]),
    ]
    head = Dense.create(rng, 84, num_classes, relu=False)
    return NetworkModel(blocks, head, arch="plaincnn", classes=list(classes or range(num_classes)))


def build_mlp(
    num_classes: int,
    seed: Seed = 0,
    classes: Sequence[int] | None = None,
    input_shape: Sequence[int] = (1, 28, 28),
    hidden: Sequence[int] = (64, 32),
) -> NetworkModel:
    """Dense-only network; one block per hidden layer (at least two)."""
    _check_classes(num_classes)
    if len(hidden) < 2:
        raise ConfigError("mlp needs at least two hidden layers (one block each)")
    rng = _rng(seed)
    widths = [int(np.prod(input_shape)), *hidden]
    blocks = [Block([Dense.create(rng, widths[i], widths[i + 1])]) for i in range(len(hidden))]
    head = Dense.create(rng, widths[-1], num_classes, relu=False)
    return NetworkModel(
        blocks,
        head,
        arch="mlp",
        arch_params={"input_shape": list(input_shape), "hidden": list(hidden)},
        input_shape=tuple(input_shape),
        classes=list(classes or range(num_classes)),
    )


ARCHITECTURES: dict[str, Callable[..., NetworkModel]] = {
    "lenet": build_lenet,
    "plaincnn": build_plaincnn,
    "mlp": build_mlp,
}


def build(
    arch: str,
    num_classes: int,
    seed: Seed = 0,
    classes: Sequence[int] | None = None,
    **params: Any,
) -> NetworkModel:
    try:
        builder = ARCHITECTURES[arch]
    except KeyError:
        raise ConfigError(f"unknown architecture {arch!r}; known: {sorted(ARCHITECTURES)}") from None
    return builder(num_classes, seed, classes, **params)
