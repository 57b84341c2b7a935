"""Threshold checks for experiment runs."""

from __future__ import annotations

from typing import Any, Mapping

import structlog

logger = structlog.get_logger(__name__)


def check_floors(values: Mapping[str, Any], floors: Mapping[str, float]) -> dict[str, bool]:
    """``value >= floor`` per key; a missing or None value fails."""
    return {key: values.get(key) is not None and float(values[key]) >= floor for key, floor in floors.items()}


def acceptance_table(values: Mapping[str, Any], floors: Mapping[str, float], percent: bool = True) -> str:
    scale = 100.0 if percent else 1.0
    verdicts = check_floors(values, floors)
    lines = ["| Metric | Value | Floor | Pass |", "|---|---:|---:|---|"]
    for key, floor in floors.items():
        value = values.get(key)
        shown = "n/a" if value is None else f"{scale * float(value):.2f}"
        lines.append(f"| {key} | {shown} | {scale * floor:.2f} | {'yes' if verdicts[key] else 'NO'} |")
    return "\n".join(lines)


def log_acceptance(experiment: str, values: Mapping[str, Any], floors: Mapping[str, float]) -> bool:
    verdicts = check_floors(values, floors)
    passed = all(verdicts.values())
    failed = [k for k, v in verdicts.items() if not v]
    logger.info("evaluation.acceptance", experiment=experiment, passed=passed, failed=failed)
    return passed
