"""Binary container codec shared by checkpoints, surrogate sets and clone packets.

Layout (little-endian)::

    magic        4 bytes ASCII ("PNCM", "PNCG", "PNCP")
    version      u32
    header_len   u32, followed by header_len bytes of UTF-8 JSON
    tensor_count u32
    per tensor:  name_len u32 + UTF-8 name, ndim u32, dims u32 x ndim,
                 payload f64 x product(dims)

The JSON header is written with sorted keys and compact separators so that the
same content always produces the same bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from contracts.errors import DataError

MAX_NDIM = 8
MAX_EXTENT = 1 << 28

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> str:
    """64-bit FNV-1a digest of *data* as a 16-digit lowercase hex string."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return f"{h:016x}"


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


@dataclass
class Container:
    """Decoded container: header dict plus ordered named tensors."""

    magic: bytes
    version: int
    header: dict[str, Any] = field(default_factory=dict)
    tensors: dict[str, np.ndarray] = field(default_factory=dict)


def encode(container: Container) -> bytes:
    if len(container.magic) != 4:
        raise ValueError("magic must be exactly 4 bytes")
    parts: list[bytes] = [container.magic, struct.pack("<I", container.version)]
    header = canonical_json(container.header)
    parts.append(struct.pack("<I", len(header)))
    parts.append(header)
    parts.append(struct.pack("<I", len(container.tensors)))
    for name, array in container.tensors.items():
        raw_name = name.encode("utf-8")
        arr = np.ascontiguousarray(array, dtype="<f8")
        parts.append(struct.pack("<I", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes(order="C"))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes, error: type[DataError], source: str) -> None:
        self._data = data
        self._pos = 0
        self._error = error
        self._source = source

    def take(self, n: int, what: str) -> bytes:
        end = self._pos + n
        if n < 0 or end > len(self._data):
            raise self._error(f"{self._source}: truncated while reading {what}")
        chunk = self._data[self._pos:end]
        self._pos = end
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos


def decode(
    data: bytes,
    magic: bytes,
    version: int,
    error: type[DataError] = DataError,
    source: str = "<bytes>",
) -> Container:
    """Decode *data*, validating magic, version, dims and payload lengths."""
    reader = _Reader(data, error, source)
    got_magic = reader.take(4, "magic")
    if got_magic != magic:
        raise error(f"{source}: bad magic {got_magic!r}, expected {magic!r}")
    got_version = reader.u32("version")
    if got_version != version:
        raise error(f"{source}: unsupported version {got_version}, expected {version}")
    header_len = reader.u32("header length")
    try:
        header = json.loads(reader.take(header_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise error(f"{source}: header is not valid JSON ({exc})") from exc
    if not isinstance(header, dict):
        raise error(f"{source}: header must be a JSON object")

    tensors: dict[str, np.ndarray] = {}
    count = reader.u32("tensor count")
    for index in range(count):
        name_len = reader.u32(f"tensor {index} name length")
        name = reader.take(name_len, f"tensor {index} name").decode("utf-8", errors="strict")
        ndim = reader.u32(f"{name} ndim")
        if ndim > MAX_NDIM:
            raise error(f"{source}: dim overflow in {name}: ndim={ndim}")
        dims = [reader.u32(f"{name} dims") for _ in range(ndim)]
        if any(d == 0 or d > MAX_EXTENT for d in dims):
            raise error(f"{source}: dim overflow in {name}: dims={dims}")
        n_values = int(np.prod(dims, dtype=np.int64)) if dims else 1
        if n_values * 8 > reader.remaining:
            raise error(f"{source}: truncated payload for {name} ({n_values} values)")
        payload = reader.take(n_values * 8, f"{name} payload")
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).astype(np.float64)
    if reader.remaining:
        raise error(f"{source}: {reader.remaining} trailing bytes")
    return Container(magic=magic, version=version, header=header, tensors=tensors)


def write_container(path: str | Path, container: Container) -> int:
    """Write *container* to *path*; returns the byte count."""
    blob = encode(container)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(blob)
    return len(blob)


def read_container(
    path: str | Path,
    magic: bytes,
    version: int,
    error: type[DataError] = DataError,
) -> Container:
    source = Path(path)
    if not source.is_file():
        raise error(f"{source}: no such file")
    return decode(source.read_bytes(), magic, version, error=error, source=str(source))
