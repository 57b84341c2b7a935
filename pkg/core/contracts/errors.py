"""Error hierarchy shared by every package.

Each class carries the process exit code the CLI maps it to:
2 config, 3 data, 4 numeric/training, 5 provenance.
"""

from __future__ import annotations


class PncError(Exception):
    """Base class for all partial-network-cloning errors."""

    exit_code: int = 1

    def to_dict(self) -> dict[str, object]:
        return {"error": type(self).__name__, "message": str(self), "exit_code": self.exit_code}


class ConfigError(PncError):
    """Invalid run configuration or flag value."""

    exit_code = 2


class DataError(PncError):
    """Dataset, file or split problem."""

    exit_code = 3


class IdxFormatError(DataError):
    """Malformed MNIST IDX file (bad magic, truncation, count mismatch)."""


class CheckpointFormatError(DataError):
    """Malformed PNCM checkpoint or PNCG surrogate file."""


class PacketFormatError(DataError):
    """Malformed PNCP clone packet."""


class NumericError(PncError):
    """Numerical failure: singular systems, non-finite values, undefined quantities."""

    exit_code = 4


class ShapeError(NumericError):
    """Dimension mismatch in a primitive or at a network splice."""

    def __init__(self, op: str, detail: str) -> None:
        super().__init__(f"{op}: {detail}")
        self.op = op


class ContractError(NumericError):
    """A pre-condition of an operation does not hold."""


class GraphError(ContractError):
    """Backward called on a graph that was already consumed."""


class TrainingError(NumericError):
    """Optimisation diverged (non-finite loss)."""

    def __init__(self, message: str, position: int | None = None) -> None:
        if position is not None:
            message = f"{message} (R={position})"
        super().__init__(message)
        self.position = position


class ProvenanceError(PncError):
    """A packet does not match the checkpoint it claims to be built on."""

    exit_code = 5


class ZooError(ProvenanceError):
    """A checkpoint referenced by a packet is missing from the zoo."""


class StageError(PncError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: PncError) -> None:
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code

    def to_dict(self) -> dict[str, object]:
        payload = super().to_dict()
        payload["stage"] = self.stage
        payload["cause"] = type(self.cause).__name__
        return payload
