"""Aggregate statistics over per-anchor fidelities, residuals and sweep columns."""

from __future__ import annotations

import statistics
from dataclasses import asdict, dataclass
from typing import Any, Sequence


@dataclass
class AggregateStats:
    """Statistical summary of one metric."""

    metric_name: str = ""
    count: int = 0
    mean: float = 0.0
    median: float = 0.0
    std_dev: float = 0.0
    min: float = 0.0
    max: float = 0.0
    p50: float = 0.0
    p90: float = 0.0
    p95: float = 0.0
    p99: float = 0.0

    @classmethod
    def from_values(cls, name: str, values: Sequence[float]) -> AggregateStats:
        if not values:
            return cls(metric_name=name)

        sorted_vals = sorted(float(v) for v in values)
        n = len(sorted_vals)

        def pick(q: float) -> float:
            return sorted_vals[min(int(n * q), n - 1)]

        return cls(
            metric_name=name,
            count=n,
            mean=statistics.mean(sorted_vals),
            median=statistics.median(sorted_vals),
            std_dev=statistics.stdev(sorted_vals) if n > 1 else 0.0,
            min=sorted_vals[0],
            max=sorted_vals[-1],
            p50=pick(0.50),
            p90=pick(0.90),
            p95=pick(0.95),
            p99=pick(0.99),
        )

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data.pop("metric_name")
        return data
