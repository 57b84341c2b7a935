"""Module-scale sweeps: one clone run per mask budget or per insertion position.

Surrogates are fitted once per sweep; every row re-runs localization, search,
finalization and evaluation from its own config, so rows are independently
reproducible.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Sequence

import pandas as pd
import structlog

from contracts.errors import ConfigError
from graft.pipeline import CloneContext, run_clone
from packet.codec import packet_bytes
from packet.transfer import to_packet
from utils.run_config import RunConfig

logger = structlog.get_logger(__name__)

AXES = ("budget", "position")
DEFAULT_BUDGETS = (0.25, 0.5, 0.75, 1.0)
COLUMNS = [
    "axis", "value", "position", "convergence_value", "ori_acc", "tar_acc", "avg_acc", "macro_avg_acc",
    "selected", "packet_bytes",
]


def axis_values(axis: str, num_blocks: int, values: Sequence[float] | None = None) -> list[float]:
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    if values:
        return [float(v) for v in values]
    if axis == "budget":
        return list(DEFAULT_BUDGETS)
    return [float(r) for r in range(num_blocks)]


def row_config(config: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "budget":
        return config.updated(budget_fraction=value, budgets=None)
    if value != int(value):
        raise ConfigError(f"position must be an integer, got {value}")
    return config.updated(position=int(value))


def sweep(context: CloneContext, config: RunConfig, axis: str, values: Sequence[float] | None = None) -> pd.DataFrame:
    """One row per axis value with the run's accuracies, chosen R and packet size."""
    rows: list[dict[str, Any]] = []
    for value in axis_values(axis, context.source.num_blocks, values):
        run_config = row_config(config, axis, value)
        outcome = run_clone(context, run_config)
        chosen = next(r for r in outcome.search.trace if r.position == outcome.search.position)
        size = None
        if context.source.origin is not None and context.target.origin is not None:
            size = len(packet_bytes(to_packet(outcome.model)))
        rows.append(
            {
                "axis": axis,
                "value": value,
                "position": outcome.search.position,
                "convergence_value": chosen.convergence_value,
                "ori_acc": outcome.final.ori_acc,
                "tar_acc": outcome.final.tar_acc,
                "avg_acc": outcome.final.avg_acc,
                "macro_avg_acc": outcome.final.macro_avg_acc,
                "selected": sum(len(s) for s in (outcome.model.masks.selected or [])[outcome.model.position:]),
                "packet_bytes": size,
            }
        )
        logger.info("evaluation.sweep.row", axis=axis, value=value, position=outcome.search.position)
    return pd.DataFrame(rows, columns=COLUMNS)


def sweep_markdown(frame: pd.DataFrame, axis: str) -> str:
    label = "Mask budget (fraction of block width)" if axis == "budget" else "Insertion position R"
    lines = [
        f"## Sweep over {label}",
        "",
        "| Value | R | Convergence | Ori (%) | Tar (%) | Avg (%) | Selected | Packet (bytes) |",
        "|---|---:|---:|---:|---:|---:|---:|---:|",
    ]
    for row in frame.itertuples(index=False):
        size = "n/a" if pd.isna(row.packet_bytes) else f"{int(row.packet_bytes)}"
        lines.append(
            f"| {row.value:g} | {row.position} | {row.convergence_value:.5f} | {100 * row.ori_acc:.2f} "
            f"| {100 * row.tar_acc:.2f} | {100 * row.avg_acc:.2f} | {row.selected} | {size} |"
        )
    if len(frame) > 1:
        lines += [
            "",
            f"Ori range: {100 * frame['ori_acc'].min():.2f} - {100 * frame['ori_acc'].max():.2f}; "
            f"best Avg at value {frame.loc[frame['avg_acc'].idxmax(), 'value']:g}.",
        ]
    return "\n".join(lines) + "\n"


def write_sweep(frame: pd.DataFrame, axis: str, csv_path: str | Path) -> tuple[Path, Path]:
    """Write the CSV and a markdown summary next to it (same stem, ``.md``)."""
    csv_target = Path(csv_path)
    csv_target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(csv_target, index=False, float_format="%.10g")
    md_target = csv_target.with_suffix(".md")
    md_target.write_text(sweep_markdown(frame, axis), encoding="utf-8")
    return csv_target, md_target
