"""Environment-level settings schema.

Responsibility: Define the Settings dataclass only. No I/O or parsing logic.
Per-run experiment parameters live in :mod:`utils.run_config`.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class Settings:
    """Typed settings loaded from environment variables."""

    # Data and artefact locations
    mnist_dir: str = "data/mnist"
    zoo_dir: str = "runs/zoo"
    runs_dir: str = "runs"

    # Logging
    log_level: str = "INFO"
    log_format: str = "console"  # console | json

    # Thread pool size for embarrassingly parallel stages (1 = serial)
    workers: int = 1
