"""Reverse-mode automatic differentiation over 64-bit numpy arrays.

Modules:
    tensor    -- Tensor, ComputeGraph, no_grad
    ops       -- differentiable primitives and the primitive_forward dispatcher
    optim     -- SgdState and sgd_step
    gradcheck -- central finite-difference oracle
"""

from autodiff.gradcheck import GradCheckResult, check_gradients, numeric_grad
from autodiff.optim import SgdState, sgd_step
from autodiff.tensor import ComputeGraph, Tensor, is_grad_enabled, no_grad

__all__ = [
    "ComputeGraph",
    "GradCheckResult",
    "SgdState",
    "Tensor",
    "check_gradients",
    "is_grad_enabled",
    "no_grad",
    "numeric_grad",
    "sgd_step",
]
