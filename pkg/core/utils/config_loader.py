"""Settings loader: .env discovery and PNC_* environment mapping.

Responsibility: Read .env files and populate Settings from environment variables.
"""

from __future__ import annotations

import os
from dataclasses import fields

from dotenv import find_dotenv, load_dotenv

from contracts.errors import ConfigError
from utils.settings import Settings

_ENV_MAP: dict[str, str] = {
    "PNC_MNIST_DIR": "mnist_dir",
    "PNC_ZOO_DIR": "zoo_dir",
    "PNC_RUNS_DIR": "runs_dir",
    "PNC_LOG_LEVEL": "log_level",
    "PNC_LOG_FORMAT": "log_format",
    "PNC_WORKERS": "workers",
}


def load_settings() -> Settings:
    """Load settings from environment variables (with .env fallback)."""
    env_file = find_dotenv(usecwd=True)
    if env_file:
        load_dotenv(env_file, override=False)

    settings = Settings()
    types = {f.name: f.type for f in fields(Settings)}
    for env_key, attr_name in _ENV_MAP.items():
        value = os.environ.get(env_key)
        if not value:
            continue
        if types[attr_name] in (int, "int"):
            try:
                setattr(settings, attr_name, int(value))
            except ValueError as exc:
                raise ConfigError(f"{env_key} must be an integer, got {value!r}") from exc
        else:
            setattr(settings, attr_name, value)
    return settings
