"""Learn soft selection masks against the surrogate set (source stays frozen)."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import structlog

from autodiff.optim import SgdState, sgd_step
from contracts.errors import NumericError, TrainingError
from localize.masks import MaskSet
from localize.objective import DEFAULT_BUDGET_PENALTY, loc_loss
from nets.network import NetworkModel
from surrogates.model_set import LocalModelSet
from utils.timer import timer

logger = structlog.get_logger(__name__)


def sample_pairs(
    rng: np.random.Generator,
    surrogates: LocalModelSet,
    batch_size: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Random (anchor position, patch mask) minibatch."""
    positions = rng.integers(0, len(surrogates), size=batch_size)
    bits = surrogates.masks[rng.integers(0, surrogates.masks.shape[0], size=batch_size)]
    return positions, bits


def train_masks(
    source: NetworkModel,
    surrogates: LocalModelSet,
    anchor_images: np.ndarray,
    budgets: Sequence[int],
    steps: int,
    lr: float,
    seed: int | np.random.Generator,
    momentum: float = 0.0,
    batch_size: int = 32,
    penalty: float = DEFAULT_BUDGET_PENALTY,
    init: MaskSet | None = None,
) -> MaskSet:
    """SGD on the mask logits only. Returns soft (unbinarized) masks.

    ``history`` on the result holds the per-step loss.

    Raises:
        ContractError: a budget exceeds its block width.
        TrainingError: the loss became non-finite.
    """
    source.freeze()
    if init is None:
        masks = MaskSet.initial(source.mask_widths, budgets)
    else:
        masks = init.copy(trainable=True)
        masks.budgets = list(budgets)
        masks.selected = None
    if steps == 0:
        return masks

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    state = SgdState(learning_rate=lr, momentum=momentum)
    with timer("localize.train_masks") as t:
        for step in range(steps):
            positions, bits = sample_pairs(rng, surrogates, batch_size)
            try:
                loss = loc_loss(source, masks, surrogates, anchor_images, positions, bits, penalty=penalty)
                loss.backward()
            except NumericError as exc:
                raise TrainingError(f"mask training diverged at step {step}: {exc}") from exc
            sgd_step(masks.trainable(), state)
            masks.history.append(loss.item())
    head = float(np.mean(masks.history[: min(10, steps)]))
    tail = float(np.mean(masks.history[-min(10, steps):]))
    logger.info(
        "localize.train_masks.done",
        steps=steps,
        budgets=list(budgets),
        initial_loss=round(head, 5),
        final_loss=round(tail, 5),
        seconds=round(t.seconds, 2),
    )
    return masks
