"""MNIST medium-scale clone: digits 5, 6 and 7 from a LeNet on 5-9 into a LeNet on 0-4.

Besides the clone itself, reports the packet size relative to the source
checkpoint and the direct-ensemble baseline next to the cloned model.
"""

from __future__ import annotations

import sys
from pathlib import Path

import structlog
from digits.idx import load_mnist
from evaluation.acceptance import acceptance_table, log_acceptance
from evaluation.reports import clone_markdown, write_report
from graft.pipeline import clone
from nets.train import checkpoint_name, ensure_pretrained
from utils.config_loader import load_settings
from utils.logging_config import configure_logging
from utils.output import print_clone_results, print_sections
from utils.run_config import load_run_config

logger = structlog.get_logger(__name__)

EXPERIMENT = "mnist-medium-clone"
OVERRIDES = {"target_classes": "0-4", "source_classes": "5-9", "cloned_classes": "5-7"}
FLOORS = {"tar_acc": 0.93, "ori_acc": 0.92, "avg_acc": 0.925}
MAX_PACKET_RATIO = 0.10


def main() -> int:
    settings = load_settings()
    configure_logging(settings.log_level, settings.log_format)
    env_defaults = {"data_dir": settings.mnist_dir, "workers": settings.workers}
    config = load_run_config(overrides=OVERRIDES, defaults=env_defaults)
    mnist = load_mnist(config.data_dir)
    zoo = Path(settings.zoo_dir)
    target = ensure_pretrained(config.target_arch, config.target_classes, mnist.train, config, zoo)
    source = ensure_pretrained(config.source_arch, config.source_classes, mnist.train, config, zoo)

    out_dir = Path(settings.runs_dir) / EXPERIMENT
    logger.info("experiment.start", experiment=EXPERIMENT, cloned=config.cloned_classes)
    _, _, report = clone(
        config,
        zoo / checkpoint_name(target.arch, target.classes),
        zoo / checkpoint_name(source.arch, source.classes),
        packet_path=out_dir / "clone.pncp",
        mnist=mnist,
    )
    write_report(report, out_dir / "report.json")
    (out_dir / "report.md").write_text(clone_markdown(report), encoding="utf-8")

    ratio = report["packet"]["ratio_to_source"]
    small_enough = ratio is not None and ratio < MAX_PACKET_RATIO
    logger.info("experiment.packet", bytes=report["packet"]["bytes"], ratio=ratio, below_limit=small_enough)

    print_clone_results(report)
    print_sections([("ACCEPTANCE", acceptance_table(report["final"], FLOORS))])
    passed = log_acceptance(EXPERIMENT, report["final"], FLOORS)
    return 0 if passed and small_enough else 1


if __name__ == "__main__":
    sys.exit(main())
