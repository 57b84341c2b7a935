"""Per-anchor local surrogate: weighted ridge regression from patch masks to logits.

For anchor x and masks b_1..b_K the design rows are ``[b_k, 1]`` and the targets
are the network's logits on ``perturb(x, b_k)`` restricted to a class list. Row
weights come from the locality kernel; the ridge penalty skips the bias row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from contracts.errors import ContractError, NumericError, ShapeError
from digits.patches import PatchGrid, PatchMask, perturb_batch
from nets.network import MaskInput, NetworkModel
from surrogates.kernel import DEFAULT_SIGMA, locality_weights

Predictor = Callable[[np.ndarray], np.ndarray]


def slice_predictor(
    net: NetworkModel,
    class_list: Sequence[int],
    masks: Sequence[MaskInput] | None = None,
    batch_size: int = 500,
) -> Predictor:
    """Logits of *net* (optionally masked) restricted to the columns of *class_list*."""
    columns = net.class_columns(class_list)

    def predict_slice(images: np.ndarray) -> np.ndarray:
        return net.predict_logits(images, batch_size=batch_size, masks=masks)[:, columns]

    return predict_slice


@dataclass
class LocalModel:
    """Weights (P+1, C_out); the last row is the bias."""

    anchor_id: int
    weights: np.ndarray
    classes: list[int] = field(default_factory=list)
    residual: float = 0.0

    def __post_init__(self) -> None:
        if self.weights.ndim != 2 or self.weights.shape[1] != len(self.classes):
            raise ContractError(f"weights {self.weights.shape} do not match {len(self.classes)} classes")
        if not np.all(np.isfinite(self.weights)):
            raise NumericError(f"local model {self.anchor_id} has non-finite weights")

    @property
    def num_patches(self) -> int:
        return self.weights.shape[0] - 1


def design_matrix(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.float64)
    return np.hstack([bits, np.ones((bits.shape[0], 1))])


def weighted_ridge(design: np.ndarray, targets: np.ndarray, row_weights: np.ndarray, ridge_lambda: float) -> np.ndarray:
    """Solve (Z'WZ + lambda*D) beta = Z'WY with D = diag(1, ..., 1, 0).

    Raises:
        NumericError: the system is singular even with the ridge term.
    """
    weighted = design * row_weights[:, None]
    gram = design.T @ weighted
    penalty = np.full(design.shape[1], ridge_lambda)
    penalty[-1] = 0.0
    gram = gram + np.diag(penalty)
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise NumericError(f"singular ridge system (lambda={ridge_lambda}, rank-deficient design)")
    try:
        return np.linalg.solve(gram, weighted.T @ targets)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"ridge solve failed: {exc}") from exc


def _targets(predictor: Predictor, x: np.ndarray, bits: np.ndarray, grid: PatchGrid) -> np.ndarray:
    images = np.broadcast_to(x, (bits.shape[0], *x.shape))
    return np.asarray(predictor(perturb_batch(images, bits, grid)), dtype=np.float64)


def fit_local_model(
    net: NetworkModel | Predictor,
    x: np.ndarray,
    masks: np.ndarray | Sequence[PatchMask],
    grid: PatchGrid,
    class_list: Sequence[int],
    ridge_lambda: float = 1e-3,
    sigma: float = DEFAULT_SIGMA,
    anchor_id: int = 0,
) -> LocalModel:
    """Fit one local model around anchor *x* (shape (C, H, W)).

    Raises:
        ContractError: fewer than P + 2 masks.
        NumericError: singular system.
    """
    bits = masks if isinstance(masks, np.ndarray) else np.stack([m.bits for m in masks])
    bits = np.asarray(bits, dtype=np.float64)
    if bits.shape[1] != grid.num_patches:
        raise ShapeError("fit_local_model", f"mask length {bits.shape[1]} != patch count {grid.num_patches}")
    if bits.shape[0] <= grid.num_patches + 1:
        raise ContractError(f"need more than P+1={grid.num_patches + 1} masks, got {bits.shape[0]}")
    predictor = slice_predictor(net, class_list) if isinstance(net, NetworkModel) else net
    targets = _targets(predictor, x, bits, grid)
    if targets.shape != (bits.shape[0], len(class_list)):
        raise ContractError(f"predictor returned {targets.shape}, expected ({bits.shape[0]}, {len(class_list)})")
    design = design_matrix(bits)
    weights = weighted_ridge(design, targets, locality_weights(bits, sigma), ridge_lambda)
    residual = float(np.mean(np.sum((targets - design @ weights) ** 2, axis=1)))
    return LocalModel(anchor_id=anchor_id, weights=weights, classes=list(class_list), residual=residual)


def predict(g: LocalModel, b: PatchMask | np.ndarray) -> np.ndarray:
    """``[b, 1] @ weights``; accepts one mask (P,) or a stack (K, P)."""
    bits = b.bits if isinstance(b, PatchMask) else np.asarray(b)
    if bits.shape[-1] != g.num_patches:
        raise ShapeError("predict", f"mask length {bits.shape[-1]} != {g.num_patches}")
    bits = bits.astype(np.float64)
    return bits @ g.weights[:-1] + g.weights[-1]


def fidelity(
    g: LocalModel,
    net: NetworkModel | Predictor,
    x: np.ndarray,
    heldout: np.ndarray | Sequence[PatchMask],
    grid: PatchGrid,
) -> float:
    """Mean over held-out masks of the squared error between the network slice and g."""
    bits = heldout if isinstance(heldout, np.ndarray) else np.stack([m.bits for m in heldout])
    bits = np.asarray(bits, dtype=np.float64)
    predictor = slice_predictor(net, g.classes) if isinstance(net, NetworkModel) else net
    targets = _targets(predictor, x, bits, grid)
    return float(np.mean(np.sum((targets - predict(g, bits)) ** 2, axis=1)))
