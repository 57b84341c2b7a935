"""Localization objective: masked source vs. surrogate on perturbed anchors."""

from __future__ import annotations

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor
from digits.patches import perturb_batch
from localize.masks import MaskSet
from nets.network import NetworkModel
from surrogates.model_set import LocalModelSet

DEFAULT_BUDGET_PENALTY = 0.1


def budget_penalty(mask_tensors: list[Tensor | None], budgets: list[int], weight: float) -> Tensor | None:
    """weight * sum over active blocks of max(0, sum(m) - c)."""
    terms = [ops.relu(ops.sub(ops.sum(m), float(c))) for m, c in zip(mask_tensors, budgets) if m is not None]
    if not terms or weight == 0.0:
        return None
    total = terms[0]
    for term in terms[1:]:
        total = ops.add(total, term)
    return ops.scale(total, weight)


def loc_loss(
    source: NetworkModel,
    masks: MaskSet,
    surrogates: LocalModelSet,
    anchor_images: np.ndarray,
    positions: np.ndarray,
    bits: np.ndarray,
    penalty: float = DEFAULT_BUDGET_PENALTY,
    active_from: int | None = None,
    mode: str = "soft",
) -> Tensor:
    """Mean over the minibatch of ||slice(source_M(b.x_i)) - g_i(b)||^2 plus the budget penalty.

    *positions* index both ``anchor_images`` and the surrogate list; *bits* holds
    one patch mask per row. Blocks before *active_from* run unmasked.

    Raises:
        ContractError: the surrogate classes are not outputs of *source*.
    """
    columns = source.class_columns(surrogates.classes)
    perturbed = perturb_batch(anchor_images[positions], bits, surrogates.grid)
    mask_tensors = masks.forward_masks(mode, active_from)
    logits = source.forward(Tensor(perturbed), mask_tensors)
    residual = ops.sub(ops.take(logits, columns, axis=1), Tensor(surrogates.predict_batch(positions, bits)))
    loss = ops.scale(ops.sum_of_squares(residual), 1.0 / len(positions))
    if mode == "soft":
        extra = budget_penalty(mask_tensors, masks.budgets, penalty)
        if extra is not None:
            loss = ops.add(loss, extra)
    return loss
