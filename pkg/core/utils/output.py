"""Console output for command results.

Responsibility: format results for stdout only. Logs go to stderr.
"""

from __future__ import annotations

import json
from typing import Any


def print_json(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def print_sections(sections: list[tuple[str, str]], separator: str = "=", width: int = 80) -> None:
    """Print titled blocks of text with section headers."""
    for label, content in sections:
        print(f"\n{separator * width}")
        print(label)
        print(separator * width)
        print(content)


def format_accuracy(report: dict[str, Any]) -> str:
    def pct(value: float | None) -> str:
        return "n/a" if value is None else f"{100.0 * value:.2f}%"

    return (
        f"Ori {pct(report.get('ori_acc'))} | Tar {pct(report.get('tar_acc'))} | "
        f"Avg {pct(report.get('avg_acc'))} | Macro {pct(report.get('macro_avg_acc'))}"
    )


def print_clone_results(report: dict[str, Any]) -> None:
    """Summarise a clone report: position trace, final accuracies, packet size."""
    trace_lines = [
        f"R={row['position']}  convergence={row['convergence_value']:.5f}  {format_accuracy(row)}"
        for row in report.get("trace", [])
    ]
    final = report.get("final", {})
    packet = report.get("packet", {})
    share = packet.get("ratio_to_source")
    ratio = "n/a" if share is None else f"{100.0 * share:.2f}%"
    print_sections(
        [
            ("POSITION SEARCH", "\n".join(trace_lines) or "(no positions searched)"),
            (f"CLONED MODEL (R={report.get('chosen_position')})", format_accuracy(final)),
            ("PACKET", f"{packet.get('bytes')} bytes, {ratio} of the source checkpoint"),
        ]
    )
