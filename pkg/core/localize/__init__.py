"""Localization of the transferable module inside the source network.

Modules:
    masks      -- MaskSet, default_budgets, binarize_topk
    objective  -- loc_loss and the soft budget penalty
    trainer    -- train_masks
"""

from localize.masks import MaskSet, binarize_topk, default_budgets
from localize.objective import budget_penalty, loc_loss
from localize.trainer import sample_pairs, train_masks

__all__ = [
    "MaskSet",
    "binarize_topk",
    "budget_penalty",
    "default_budgets",
    "loc_loss",
    "sample_pairs",
    "train_masks",
]
