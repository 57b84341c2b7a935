"""Local surrogate models of a network around anchor inputs.

Modules:
    kernel       -- locality weight over patch-mask density
    local_model  -- weighted ridge fit, predict, fidelity
    model_set    -- LocalModelSet, fit_set, PNCG files, conditional similarity
"""

from surrogates.kernel import locality_weight, locality_weights
from surrogates.local_model import LocalModel, fidelity, fit_local_model, predict, slice_predictor, weighted_ridge
from surrogates.model_set import (
    LocalModelSet,
    fidelity_per_anchor,
    fit_set,
    load_model_set,
    save_model_set,
    sim_conditional,
)

__all__ = [
    "LocalModel",
    "LocalModelSet",
    "fidelity",
    "fidelity_per_anchor",
    "fit_local_model",
    "fit_set",
    "load_model_set",
    "locality_weight",
    "locality_weights",
    "predict",
    "save_model_set",
    "sim_conditional",
    "slice_predictor",
    "weighted_ridge",
]
