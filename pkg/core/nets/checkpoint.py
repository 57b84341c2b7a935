"""PNCM checkpoint files.

Header: ``arch``, ``arch_params``, ``classes`` and free-form ``metadata``
(seed, epochs, test accuracy). Tensors are stored under their parameter names in
``named_parameters`` order. Loaded networks come back frozen.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np
import structlog

from contracts.errors import CheckpointFormatError, ConfigError
from contracts.wire import Container, decode, encode, fnv1a_64
from nets import zoo
from nets.network import CheckpointRef, NetworkModel

logger = structlog.get_logger(__name__)

CHECKPOINT_MAGIC = b"PNCM"
CHECKPOINT_VERSION = 1


def checkpoint_bytes(net: NetworkModel) -> bytes:
    header: dict[str, Any] = {
        "arch": net.arch,
        "arch_params": net.arch_params,
        "classes": net.classes,
        "metadata": net.metadata,
    }
    return encode(Container(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, header, net.state()))


def save_checkpoint(net: NetworkModel, path: str | Path) -> int:
    """Write *net* to *path*; returns the byte count."""
    blob = checkpoint_bytes(net)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(blob)
    logger.info("nets.checkpoint.saved", path=str(target), arch=net.arch, bytes=len(blob))
    return len(blob)


def network_from_bytes(blob: bytes, source: str = "<bytes>") -> NetworkModel:
    container = decode(blob, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, error=CheckpointFormatError, source=source)
    header = container.header
    try:
        arch = header["arch"]
        classes = [int(c) for c in header["classes"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"{source}: incomplete header ({exc})") from exc
    try:
        net = zoo.build(arch, len(classes), 0, classes, **header.get("arch_params", {}))
    except (ConfigError, TypeError) as exc:
        raise CheckpointFormatError(f"{source}: cannot rebuild architecture {arch!r} ({exc})") from exc

    expected = dict(net.named_parameters())
    if set(container.tensors) != set(expected):
        missing = sorted(set(expected) - set(container.tensors))
        extra = sorted(set(container.tensors) - set(expected))
        raise CheckpointFormatError(f"{source}: tensor set mismatch (missing {missing}, unexpected {extra})")
    for name, tensor in expected.items():
        array = container.tensors[name]
        if array.shape != tensor.data.shape:
            raise CheckpointFormatError(f"{source}: {name} has dims {array.shape}, expected {tensor.data.shape}")
        tensor.data = np.array(array, dtype=np.float64)
    net.metadata = dict(header.get("metadata", {}))
    return net.freeze()


def load_checkpoint(path: str | Path) -> NetworkModel:
    """Load a frozen network; ``origin`` records the file name, digest and size.

    Raises:
        CheckpointFormatError: missing file, bad magic, version mismatch, dim
            overflow, truncation or a tensor set that does not fit the architecture.
    """
    source = Path(path)
    if not source.is_file():
        raise CheckpointFormatError(f"{source}: no such file")
    blob = source.read_bytes()
    net = network_from_bytes(blob, source=str(source))
    net.origin = CheckpointRef(name=source.name, digest=fnv1a_64(blob), size=len(blob))
    logger.debug("nets.checkpoint.loaded", path=str(source), arch=net.arch, digest=net.origin.digest)
    return net


def clone_network(net: NetworkModel) -> NetworkModel:
    """Independent copy (same parameters, same origin)."""
    copy = network_from_bytes(checkpoint_bytes(net))
    copy.origin = net.origin
    return copy

