"""JSON report files and markdown tables.

Reports are written with sorted keys so two runs of the same config differ only
in the ``timestamp`` field.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

VOLATILE_KEYS = ("timestamp",)


def report_json(report: dict[str, Any]) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_report(report: dict[str, Any], path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(report_json(report), encoding="utf-8")
    return target


def read_report(path: str | Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def strip_volatile(report: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in report.items() if k not in VOLATILE_KEYS}


def reports_match(a: dict[str, Any], b: dict[str, Any]) -> bool:
    """Byte-level comparison of two reports, timestamp excluded."""
    return report_json(strip_volatile(a)) == report_json(strip_volatile(b))


def _pct(value: float | None) -> str:
    return "n/a" if value is None else f"{100.0 * value:.2f}"


def trace_table(report: dict[str, Any]) -> str:
    """Markdown table of the position search recorded in a clone report."""
    lines = [
        "## Position search",
        "",
        "| R | Convergence | Initial loss | Ori (%) | Tar (%) | Avg (%) |",
        "|---|---:|---:|---:|---:|---:|",
    ]
    for row in report.get("trace", []):
        marker = " *" if row["position"] == report.get("chosen_position") else ""
        lines.append(
            f"| {row['position']}{marker} | {row['convergence_value']:.5f} | {row['initial_loss']:.5f} "
            f"| {_pct(row.get('ori_acc'))} | {_pct(row.get('tar_acc'))} | {_pct(row.get('avg_acc'))} |"
        )
    return "\n".join(lines)


def accuracy_table(report: dict[str, Any]) -> str:
    """Markdown comparison of the cloned model against the direct-ensemble baseline."""
    lines = [
        "## Accuracy",
        "",
        "| Model | Ori (%) | Tar (%) | Avg (%) | Macro Avg (%) |",
        "|---|---:|---:|---:|---:|",
    ]
    rows = (("Target (before cloning)", "target_before"), ("Direct ensemble", "direct_ensemble"), ("Cloned", "final"))
    for label, key in rows:
        row = report.get(key)
        if not row:
            continue
        lines.append(
            f"| {label} | {_pct(row.get('ori_acc'))} | {_pct(row.get('tar_acc'))} "
            f"| {_pct(row.get('avg_acc'))} | {_pct(row.get('macro_avg_acc'))} |"
        )
    return "\n".join(lines)


def clone_markdown(report: dict[str, Any]) -> str:
    packet = report.get("packet", {})
    parts = [
        f"# Clone of classes {report.get('cloned_classes')}",
        "",
        accuracy_table(report),
        "",
        trace_table(report),
        "",
        f"Packet: {packet.get('bytes')} bytes ({_pct(packet.get('ratio_to_source'))}% of the source checkpoint).",
    ]
    return "\n".join(parts) + "\n"
