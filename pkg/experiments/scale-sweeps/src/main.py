"""Module-scale sweeps for a one-class MNIST clone.

Budget axis: fraction of each block's width kept by the masks, in
{0.25, 0.5, 0.75, 1.0}. Position axis: every insertion position R, each pinned.
Surrogates are fitted once and shared by both sweeps.
"""

from __future__ import annotations

import sys
from pathlib import Path

import pandas as pd
import structlog
from digits.idx import load_mnist
from evaluation.sweep import sweep, sweep_markdown, write_sweep
from graft.pipeline import prepare_context
from nets.train import ensure_pretrained
from utils.config_loader import load_settings
from utils.logging_config import configure_logging
from utils.output import print_sections
from utils.run_config import load_run_config

logger = structlog.get_logger(__name__)

EXPERIMENT = "scale-sweeps"
OVERRIDES = {"target_classes": "0-4", "source_classes": "5-9", "cloned_classes": "5"}
TOLERANCE = 0.005


def budget_shape_holds(frame: pd.DataFrame) -> bool:
    """Ori at full budget is not above Ori at the smallest budget by more than the tolerance."""
    by_value = frame.set_index("value")["ori_acc"]
    return bool(by_value[by_value.index.max()] <= by_value[by_value.index.min()] + TOLERANCE)


def position_choice_holds(frame: pd.DataFrame) -> bool:
    """The lowest-convergence R is within the tolerance of the best Avg over all R."""
    ordered = frame.sort_values(["convergence_value", "position"], ascending=[True, False])
    chosen = ordered.iloc[0]["avg_acc"]
    return bool(chosen >= frame["avg_acc"].max() - TOLERANCE)


def main() -> int:
    settings = load_settings()
    configure_logging(settings.log_level, settings.log_format)
    env_defaults = {"data_dir": settings.mnist_dir, "workers": settings.workers}
    config = load_run_config(overrides=OVERRIDES, defaults=env_defaults)
    mnist = load_mnist(config.data_dir)
    target = ensure_pretrained(config.target_arch, config.target_classes, mnist.train, config, settings.zoo_dir)
    source = ensure_pretrained(config.source_arch, config.source_classes, mnist.train, config, settings.zoo_dir)
    context = prepare_context(config, target, source, mnist)

    out_dir = Path(settings.runs_dir) / EXPERIMENT
    frames = {}
    for axis in ("budget", "position"):
        logger.info("experiment.sweep", experiment=EXPERIMENT, axis=axis)
        frames[axis] = sweep(context, config, axis)
        write_sweep(frames[axis], axis, out_dir / f"{axis}.csv")

    checks = {
        "budget_shape": budget_shape_holds(frames["budget"]),
        "position_choice": position_choice_holds(frames["position"]),
    }
    logger.info("evaluation.acceptance", experiment=EXPERIMENT, **checks)
    print_sections(
        [
            ("BUDGET SWEEP", sweep_markdown(frames["budget"], "budget")),
            ("POSITION SWEEP", sweep_markdown(frames["position"], "position")),
            ("ACCEPTANCE", "\n".join(f"{name}: {'pass' if ok else 'FAIL'}" for name, ok in checks.items())),
        ]
    )
    return 0 if all(checks.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
