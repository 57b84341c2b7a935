"""Insertion objective: distil the cloned slice from G and the old slice from the frozen target.

Every KL term is KL(student || reference) = sum p * (log p - log q), with p the
softmax of the cloned model's slice and q the softmax of the reference (surrogate
or frozen target); both log terms come from ``log_softmax``. The slice-routing term ties the two
slices together (it is what makes a single cloned class learnable, since a softmax
over one logit carries no signal).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor, no_grad
from contracts.errors import ContractError
from digits.patches import perturb_batch
from graft.cloned import ClonedModel, cloned_forward
from localize.objective import loc_loss
from surrogates.model_set import LocalModelSet


def kl_divergence(reference_logits: np.ndarray, student_logits: Tensor) -> Tensor:
    """Mean over rows of KL(softmax(student) || softmax(reference)); gradients flow through both factors."""
    if reference_logits.shape != student_logits.dims:
        raise ContractError(f"reference logits {reference_logits.shape} vs student logits {student_logits.dims}")
    log_p = ops.log_softmax(student_logits, axis=1)
    p = ops.softmax(student_logits, axis=1)
    gap = ops.sub(log_p, Tensor(ops.log_softmax_array(reference_logits, axis=1)))
    return ops.scale(ops.sum(ops.mul(p, gap)), 1.0 / reference_logits.shape[0])


def route_term(logits: Tensor, old_columns: Sequence[int], new_columns: Sequence[int], toward_new: bool) -> Tensor:
    """Mean of -log sigmoid(lse(wanted slice) - lse(other slice)) over the rows."""
    lse_old = ops.logsumexp(ops.take(logits, old_columns, axis=1), axis=1)
    lse_new = ops.logsumexp(ops.take(logits, new_columns, axis=1), axis=1)
    margin = ops.sub(lse_new, lse_old) if toward_new else ops.sub(lse_old, lse_new)
    return ops.scale(ops.mean(ops.log_sigmoid(margin)), -1.0)


def _check_class_map(c: ClonedModel, surrogates: LocalModelSet) -> None:
    if list(surrogates.classes) != list(c.cloned_classes):
        raise ContractError(f"surrogates cover classes {surrogates.classes}, cloned slice is {c.cloned_classes}")
    if len(c.class_map) != len(set(c.class_map)):
        raise ContractError(f"class map {c.class_map} repeats a label")


def _slice_terms(c: ClonedModel, logits: Tensor, perturbed: np.ndarray, reference_new: np.ndarray) -> Tensor:
    with no_grad():
        reference_old = c.target.forward(Tensor(perturbed)).data
    new_term = kl_divergence(reference_new, ops.take(logits, c.new_columns, axis=1))
    old_term = kl_divergence(reference_old, ops.take(logits, c.old_columns, axis=1))
    return ops.add(new_term, old_term)


def ins_loss(
    c: ClonedModel,
    surrogates: LocalModelSet,
    anchor_images: np.ndarray,
    positions: np.ndarray,
    bits: np.ndarray,
    mode: str = "soft",
) -> Tensor:
    """KL(new slice || g_i(b)) + KL(old slice || target) on perturbed anchors, minibatch mean.

    Raises:
        ContractError: the surrogate classes are not the cloned slice, or the class
            map repeats a label.
    """
    _check_class_map(c, surrogates)
    perturbed = perturb_batch(anchor_images[positions], bits, surrogates.grid)
    logits = cloned_forward(c, Tensor(perturbed), mode)
    return _slice_terms(c, logits, perturbed, surrogates.predict_batch(positions, bits))


def joint_loss(
    c: ClonedModel,
    surrogates: LocalModelSet,
    anchor_images: np.ndarray,
    positions: np.ndarray,
    bits: np.ndarray,
    negatives: np.ndarray | None = None,
    penalty: float = 0.1,
    route_weight: float = 1.0,
    with_localization: bool = True,
) -> Tensor:
    """loc_loss + ins_loss + the routing terms for one minibatch.

    *negatives* are already perturbed rest-class images (or None).
    """
    _check_class_map(c, surrogates)
    perturbed = perturb_batch(anchor_images[positions], bits, surrogates.grid)
    logits = cloned_forward(c, Tensor(perturbed), "soft")
    loss = _slice_terms(c, logits, perturbed, surrogates.predict_batch(positions, bits))
    if with_localization:
        loss = ops.add(
            loss,
            loc_loss(
                c.source, c.masks, surrogates, anchor_images, positions, bits,
                penalty=penalty, active_from=c.position,
            ),
        )
    if route_weight > 0.0:
        routed = route_term(logits, c.old_columns, c.new_columns, toward_new=True)
        if negatives is not None and negatives.shape[0] > 0:
            negative_logits = cloned_forward(c, Tensor(negatives), "soft")
            routed = ops.add(routed, route_term(negative_logits, c.old_columns, c.new_columns, toward_new=False))
        loss = ops.add(loss, ops.scale(routed, route_weight))
    return loss
