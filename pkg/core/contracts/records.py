"""Report records shared by graft, evaluation and the CLI.

All records serialise with ``to_dict`` and contain no wall-clock values, so two
runs with the same config produce identical dictionaries.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any


@dataclass
class AccuracyReport:
    """Top-1 accuracy on original (Ori), cloned (Tar) and pooled (Avg) classes.

    ``avg_acc`` is sample-weighted over the union; ``macro_avg_acc`` is the mean of
    the per-class accuracies. A group with no samples reports ``None``.
    """

    ori_acc: float | None = None
    tar_acc: float | None = None
    avg_acc: float | None = None
    macro_avg_acc: float | None = None
    ori_count: int = 0
    tar_count: int = 0
    per_class: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AccuracyReport:
        return cls(**data)


@dataclass
class PositionRecord:
    """Outcome of fitting the branch at one insertion position R."""

    position: int
    convergence_value: float
    initial_loss: float
    epoch_losses: list[float] = field(default_factory=list)
    ori_acc: float | None = None
    tar_acc: float | None = None
    avg_acc: float | None = None
    macro_avg_acc: float | None = None
    selected: list[list[int]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class SurrogateSummary:
    """Fidelity of the local model set (per-anchor values plus aggregates)."""

    anchors: int
    masks: int
    heldout_masks: int
    residuals: dict[str, float] = field(default_factory=dict)
    fidelity: dict[str, float] = field(default_factory=dict)
    fidelity_per_anchor: list[float] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)
