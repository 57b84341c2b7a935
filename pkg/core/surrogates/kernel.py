"""Locality kernel over patch-mask density."""

from __future__ import annotations

import numpy as np

from digits.patches import PatchMask

DEFAULT_SIGMA = 0.5


def locality_weight(b: PatchMask | np.ndarray, sigma: float = DEFAULT_SIGMA) -> float:
    """exp(-(1 - density)^2 / sigma^2): 1 for the all-ones mask, smaller as patches are removed."""
    bits = b.bits if isinstance(b, PatchMask) else np.asarray(b)
    density = float(bits.mean())
    return float(np.exp(-((1.0 - density) ** 2) / sigma**2))


def locality_weights(bits: np.ndarray, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Vectorised :func:`locality_weight` for a (K, P) stack."""
    density = np.asarray(bits, dtype=np.float64).mean(axis=1)
    return np.exp(-((1.0 - density) ** 2) / sigma**2)
