"""Conditional similarity over the ten classes of an MNIST LeNet.

Fits one surrogate set per class on the full source, localizes one module per
class and compares the two modes: module-mode entries should concentrate on
the diagonal.
"""

from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import structlog
from digits.idx import load_mnist
from evaluation.acceptance import acceptance_table, log_acceptance
from evaluation.reports import write_report
from evaluation.similarity import SimilarityMatrix, locality_matrices, write_heat_image
from nets.train import ensure_pretrained
from utils.config_loader import load_settings
from utils.logging_config import configure_logging
from utils.output import print_sections
from utils.run_config import load_run_config

logger = structlog.get_logger(__name__)

EXPERIMENT = "similarity-matrix"
OVERRIDES = {"target_classes": "0-4", "source_classes": "0-9", "cloned_classes": "5"}
FLOORS = {"module_mode_gap": 0.10}


def render(matrix: SimilarityMatrix) -> str:
    header = "| | " + " | ".join(str(c) for c in matrix.labels) + " |"
    rule = "|---|" + "---:|" * len(matrix.labels)
    rows = [
        f"| {label} | " + " | ".join(f"{v:.2f}" for v in row) + " |"
        for label, row in zip(matrix.labels, np.asarray(matrix.values))
    ]
    return "\n".join([header, rule, *rows, "", f"diagonal gap: {matrix.diagonal_gap():.4f}"])


def main() -> int:
    settings = load_settings()
    configure_logging(settings.log_level, settings.log_format)
    env_defaults = {"data_dir": settings.mnist_dir, "workers": settings.workers}
    config = load_run_config(overrides=OVERRIDES, defaults=env_defaults)
    mnist = load_mnist(config.data_dir)
    source = ensure_pretrained(config.source_arch, config.source_classes, mnist.train, config, settings.zoo_dir)

    logger.info("experiment.start", experiment=EXPERIMENT, classes=source.classes)
    source_mode, module_mode = locality_matrices(source, mnist.train, config)

    out_dir = Path(settings.runs_dir) / EXPERIMENT
    gaps = {"source_mode_gap": source_mode.diagonal_gap(), "module_mode_gap": module_mode.diagonal_gap()}
    write_report(
        {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "config": config.echo(),
            "source_mode": source_mode.to_dict(),
            "module_mode": module_mode.to_dict(),
            **gaps,
        },
        out_dir / "similarity.json",
    )
    write_heat_image(module_mode, out_dir / "module-mode.ppm")
    write_heat_image(source_mode, out_dir / "source-mode.ppm")

    print_sections(
        [
            ("SOURCE MODE", render(source_mode)),
            ("MODULE MODE", render(module_mode)),
            ("ACCEPTANCE", acceptance_table(gaps, FLOORS, percent=False)),
        ]
    )
    return 0 if log_acceptance(EXPERIMENT, gaps, FLOORS) else 1


if __name__ == "__main__":
    sys.exit(main())
