"""The clone packet {M, R, A, F_c} and its PNCP file format.

Header (canonical JSON): source/target references (arch, checkpoint name,
digest, byte size), position R, per-block selected indices, adapter spec,
class lists and creation metadata. Tensors: ``adapter.weight``,
``adapter.bias``, ``head.weight``, ``head.bias``. No backbone weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from contracts.errors import PacketFormatError
from contracts.wire import Container, decode, encode

PACKET_MAGIC = b"PNCP"
PACKET_VERSION = 1
PACKET_TENSORS = ("adapter.weight", "adapter.bias", "head.weight", "head.bias")


@dataclass(frozen=True)
class ModelRef:
    """Zoo entry a packet is bound to."""

    arch: str
    name: str
    digest: str
    size: int

    def to_dict(self) -> dict[str, Any]:
        return {"arch": self.arch, "name": self.name, "digest": self.digest, "size": self.size}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModelRef:
        return cls(arch=str(data["arch"]), name=str(data["name"]), digest=str(data["digest"]), size=int(data["size"]))


@dataclass
class ClonePacket:
    source: ModelRef
    target: ModelRef
    position: int
    selected: list[list[int]]
    adapter: dict[str, Any]
    target_classes: list[int]
    cloned_classes: list[int]
    tensors: dict[str, np.ndarray]
    metadata: dict[str, Any] = field(default_factory=dict)
    version: int = PACKET_VERSION

    def header(self) -> dict[str, Any]:
        return {
            "source": self.source.to_dict(),
            "target": self.target.to_dict(),
            "position": self.position,
            "selected": self.selected,
            "adapter": self.adapter,
            "target_classes": self.target_classes,
            "cloned_classes": self.cloned_classes,
            "metadata": self.metadata,
        }


def packet_bytes(packet: ClonePacket) -> bytes:
    tensors = {name: packet.tensors[name] for name in PACKET_TENSORS}
    return encode(Container(PACKET_MAGIC, packet.version, packet.header(), tensors))


def packet_from_bytes(blob: bytes, source: str = "<bytes>") -> ClonePacket:
    """Decode a PNCP blob.

    Raises:
        PacketFormatError: bad magic, version, truncation, incomplete header or an
            unexpected tensor set.
    """
    container = decode(blob, PACKET_MAGIC, PACKET_VERSION, error=PacketFormatError, source=source)
    if set(container.tensors) != set(PACKET_TENSORS):
        raise PacketFormatError(f"{source}: tensors {sorted(container.tensors)}, expected {sorted(PACKET_TENSORS)}")
    h = container.header
    try:
        return ClonePacket(
            source=ModelRef.from_dict(h["source"]),
            target=ModelRef.from_dict(h["target"]),
            position=int(h["position"]),
            selected=[[int(j) for j in block] for block in h["selected"]],
            adapter=dict(h["adapter"]),
            target_classes=[int(c) for c in h["target_classes"]],
            cloned_classes=[int(c) for c in h["cloned_classes"]],
            tensors=dict(container.tensors),
            metadata=dict(h.get("metadata", {})),
            version=container.version,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PacketFormatError(f"{source}: incomplete header ({exc})") from exc


def write_packet(packet: ClonePacket, path: str | Path) -> int:
    blob = packet_bytes(packet)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(blob)
    return len(blob)


def read_packet(path: str | Path) -> ClonePacket:
    source = Path(path)
    if not source.is_file():
        raise PacketFormatError(f"{source}: no such file")
    return packet_from_bytes(source.read_bytes(), source=str(source))
