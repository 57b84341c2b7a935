"""Per-run experiment configuration.

Responsibility: the RunConfig schema, its validation and the flags > file > defaults
precedence. Every field has a default; the effective config is echoed into reports.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from contracts.errors import ConfigError
from contracts.wire import canonical_json, fnv1a_64

Architecture = Literal["lenet", "plaincnn", "mlp"]
Ablation = Literal["none", "no-local", "no-insert"]


def parse_classes(spec: str | list[int] | tuple[int, ...]) -> list[int]:
    """Parse ``"0-4"``, ``"5,6,7"`` or ``"1,3-5"`` into a sorted class list."""
    if isinstance(spec, (list, tuple)):
        return sorted({int(c) for c in spec})
    classes: set[int] = set()
    for part in str(spec).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(p) for p in part.split("-", 1))
                classes.update(range(lo, hi + 1))
            else:
                classes.add(int(part))
        except ValueError as exc:
            raise ConfigError(f"invalid class spec {spec!r}") from exc
    return sorted(classes)


class RunConfig(BaseModel):
    """All knobs of a cloning run. Defaults reproduce the MNIST small-scale setting."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # Data
    data_dir: str = "data/mnist"
    seed: int = 0
    target_classes: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    source_classes: list[int] = Field(default_factory=lambda: [5, 6, 7, 8, 9])
    cloned_classes: list[int] = Field(default_factory=lambda: [5])
    data_fraction: float = Field(default=0.3, gt=0.0, le=1.0)

    # Architectures
    target_arch: Architecture = "lenet"
    source_arch: Architecture = "lenet"

    # Pre-training
    pretrain_epochs: int = Field(default=8, ge=0)
    pretrain_lr: float = Field(default=0.01, gt=0.0)
    pretrain_momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    pretrain_batch: int = Field(default=64, ge=1)

    # Surrogates
    num_masks: int = Field(default=100, ge=2)
    heldout_masks: int = Field(default=50, ge=1)
    grid_rows: int = Field(default=4, ge=1)
    grid_cols: int = Field(default=4, ge=1)
    ridge_lambda: float = Field(default=1e-3, ge=0.0)
    kernel_sigma: float = Field(default=0.5, gt=0.0)
    similarity_anchors: int = Field(default=200, ge=1)

    # Localization
    budget_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    budgets: list[int] | None = None
    budget_penalty: float = Field(default=0.1, ge=0.0)
    mask_steps: int = Field(default=300, ge=0)
    mask_lr: float = Field(default=0.05, ge=0.0)
    mask_momentum: float = Field(default=0.0, ge=0.0, lt=1.0)
    mask_batch: int = Field(default=32, ge=1)

    # Insertion
    epochs: int = Field(default=10, ge=1)
    lr: float = Field(default=0.01, ge=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    batch_size: int = Field(default=32, ge=1)
    head_init_std: float = Field(default=1e-2, ge=0.0)
    route_weight: float = Field(default=1.0, ge=0.0)
    negative_ratio: float = Field(default=1.0, ge=0.0)
    position: int | None = Field(default=None, ge=0)
    parallel_sweep: bool = False
    ablation: Ablation = "none"

    # Execution
    workers: int = Field(default=1, ge=1)
    eval_batch: int = Field(default=500, ge=1)
    output_dir: str = "runs"

    @field_validator("target_classes", "source_classes", "cloned_classes", mode="before")
    @classmethod
    def _parse_class_lists(cls, value: Any) -> list[int]:
        if isinstance(value, (str, list, tuple)):
            return parse_classes(value)
        return value

    @field_validator("target_classes", "source_classes", "cloned_classes")
    @classmethod
    def _check_class_range(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("class set must not be empty")
        if any(c < 0 or c > 9 for c in value):
            raise ValueError(f"classes must lie in 0..9, got {value}")
        return value

    @model_validator(mode="after")
    def _check_splits(self) -> RunConfig:
        if not set(self.cloned_classes) <= set(self.source_classes):
            raise ValueError("cloned_classes must be a subset of source_classes")
        if set(self.target_classes) & set(self.cloned_classes):
            raise ValueError("target_classes and cloned_classes must be disjoint")
        if self.num_masks <= self.grid_rows * self.grid_cols + 1:
            raise ValueError("num_masks must exceed grid_rows * grid_cols + 1 for a well-posed ridge fit")
        return self

    @property
    def rest_classes(self) -> list[int]:
        """Source classes that are not cloned (the D-bar split)."""
        return [c for c in self.source_classes if c not in self.cloned_classes]

    def echo(self) -> dict[str, Any]:
        return self.model_dump(mode="json")

    def digest(self) -> str:
        return fnv1a_64(canonical_json(self.echo()))

    def updated(self, **changes: Any) -> RunConfig:
        """Validated copy with *changes* applied."""
        try:
            return RunConfig(**{**self.model_dump(), **changes})
        except ValidationError as exc:
            raise ConfigError(f"config schema violation: {exc}") from exc


def load_run_config(
    path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
    defaults: dict[str, Any] | None = None,
) -> RunConfig:
    """Build a RunConfig with precedence flags > file > environment defaults > schema defaults.

    Raises:
        ConfigError: unreadable file or schema violation.
    """
    data: dict[str, Any] = dict(defaults or {})
    if path is not None:
        source = Path(path)
        try:
            loaded = json.loads(source.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {source}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {source} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {source} must hold a JSON object")
        data.update(loaded)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig(**data)
    except ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc}") from exc


def parse_override(item: str) -> tuple[str, Any]:
    """Parse one ``key=value`` override; the value is read as JSON when possible."""
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, _, raw = item.partition("=")
    try:
        value: Any = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value
