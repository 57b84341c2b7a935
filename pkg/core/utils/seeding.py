"""Named random sub-streams derived from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def substream(root_seed: int, name: str) -> np.random.Generator:
    """Independent generator for stage *name*.

    The stream depends only on ``(root_seed, name)``, so each stage is reproducible
    on its own regardless of what ran before it.
    """
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), zlib.crc32(name.encode("utf-8"))]))


def derive_seed(root_seed: int, name: str) -> int:
    """Plain integer seed for APIs that take an int (stored in reports and headers)."""
    return int(substream(root_seed, name).integers(0, 2**31 - 1))
