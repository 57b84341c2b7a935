"""Central finite-difference oracle for autodiff gradients.

Shared by the unit tests and ``pnc selftest``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from autodiff.tensor import Tensor, no_grad


@dataclass
class GradCheckResult:
    name: str
    max_abs_error: float
    max_rel_error: float
    checked: int
    passed: bool

    def to_dict(self) -> dict[str, object]:
        return {
            "name": self.name,
            "max_abs_error": self.max_abs_error,
            "max_rel_error": self.max_rel_error,
            "checked": self.checked,
            "passed": self.passed,
        }


def numeric_grad(loss_fn: Callable[[], Tensor], param: Tensor, step: float = 1e-6) -> np.ndarray:
    """d loss / d param by central differences, perturbing ``param.data`` in place."""
    param.data = np.ascontiguousarray(param.data)
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            plus = loss_fn().item()
            flat[i] = saved - step
            minus = loss_fn().item()
            flat[i] = saved
            out[i] = (plus - minus) / (2.0 * step)
    return grad


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    name: str = "",
    step: float = 1e-6,
    rtol: float = 1e-6,
    atol: float = 1e-8,
) -> GradCheckResult:
    """Compare autodiff gradients of ``loss_fn()`` against central differences.

    An entry passes when ``|a - n| <= atol + rtol * max(|a|, |n|)``; ``atol`` absorbs
    the cancellation noise of the difference quotient on near-zero entries.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    for p in params:
        p.grad = None

    max_abs = 0.0
    max_rel = 0.0
    passed = True
    checked = 0
    for p, a in zip(params, analytic):
        n = numeric_grad(loss_fn, p, step=step)
        diff = np.abs(a - n)
        scale = np.maximum(np.abs(a), np.abs(n))
        rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)
        max_abs = max(max_abs, float(diff.max(initial=0.0)))
        max_rel = max(max_rel, float(rel.max(initial=0.0)))
        passed = passed and bool(np.all(diff <= atol + rtol * scale))
        checked += a.size
    return GradCheckResult(name=name, max_abs_error=max_abs, max_rel_error=max_rel, checked=checked, passed=passed)
