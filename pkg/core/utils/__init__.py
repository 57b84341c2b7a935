"""Shared utilities.

Modules:
    settings        -- Settings dataclass (schema only)
    config_loader   -- .env discovery and load_settings()
    run_config      -- RunConfig schema and flags > file > defaults loading
    logging_config  -- structlog configuration
    seeding         -- named random sub-streams from one root seed
    timer           -- timing context manager
    output          -- console formatting of command results
"""

from utils.config_loader import load_settings
from utils.logging_config import configure_logging
from utils.output import print_clone_results, print_json, print_sections
from utils.run_config import RunConfig, load_run_config, parse_classes, parse_override
from utils.seeding import derive_seed, substream
from utils.settings import Settings
from utils.timer import TimerResult, timer

__all__ = [
    "RunConfig",
    "Settings",
    "TimerResult",
    "configure_logging",
    "derive_seed",
    "load_run_config",
    "load_settings",
    "parse_classes",
    "parse_override",
    "print_clone_results",
    "print_json",
    "print_sections",
    "substream",
    "timer",
]
