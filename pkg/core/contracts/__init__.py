"""Shared contracts: error hierarchy, binary container codec, report records.

Modules:
    errors  -- PncError hierarchy with CLI exit codes
    wire    -- little-endian container codec (PNCM / PNCG / PNCP) and FNV-1a digests
    records -- dataclass records that end up in JSON reports
"""

from contracts.errors import (
    CheckpointFormatError,
    ConfigError,
    ContractError,
    DataError,
    GraphError,
    IdxFormatError,
    NumericError,
    PacketFormatError,
    PncError,
    ProvenanceError,
    ShapeError,
    StageError,
    TrainingError,
    ZooError,
)
from contracts.records import AccuracyReport, PositionRecord, SurrogateSummary
from contracts.wire import Container, canonical_json, decode, encode, fnv1a_64, read_container, write_container

__all__ = [
    "AccuracyReport",
    "PositionRecord",
    "SurrogateSummary",
    "CheckpointFormatError",
    "ConfigError",
    "Container",
    "ContractError",
    "DataError",
    "GraphError",
    "IdxFormatError",
    "NumericError",
    "PacketFormatError",
    "PncError",
    "ProvenanceError",
    "ShapeError",
    "StageError",
    "TrainingError",
    "ZooError",
    "canonical_json",
    "decode",
    "encode",
    "fnv1a_64",
    "read_container",
    "write_container",
]
