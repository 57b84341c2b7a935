"""Grafting the localized source module into the frozen target.

Modules:
    adapter    -- Adapter (1x1 conv or dense + ReLU, optional adaptive pooling)
    head       -- ExtendedHead over concat(trunk, branch) features
    cloned     -- ClonedModel and cloned_forward
    objective  -- KL terms, slice routing, ins_loss, joint_loss
    search     -- fit_at_position, search_position
    pipeline   -- clone, prepare_context, run_clone (import as ``graft.pipeline``;
                  it depends on the packet package, which depends on this one)
"""

from graft.adapter import Adapter, adapter_from_tensors, build_adapter
from graft.cloned import ClonedModel, cloned_forward
from graft.head import ExtendedHead, build_extended_head, head_from_tensors
from graft.objective import ins_loss, joint_loss, kl_divergence, route_term
from graft.search import PositionFit, SearchResult, finalize, fit_at_position, search_position, select_position

__all__ = [
    "Adapter",
    "ClonedModel",
    "ExtendedHead",
    "PositionFit",
    "SearchResult",
    "adapter_from_tensors",
    "build_adapter",
    "build_extended_head",
    "cloned_forward",
    "finalize",
    "fit_at_position",
    "head_from_tensors",
    "ins_loss",
    "joint_loss",
    "kl_divergence",
    "route_term",
    "search_position",
    "select_position",
]
