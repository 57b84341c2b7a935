"""``pnc selftest``: gradient checks and oracle comparisons on randomized toy instances."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np
import structlog

from autodiff import ops
from autodiff.gradcheck import check_gradients
from autodiff.tensor import Tensor, no_grad
from digits.patches import PatchGrid, gen_masks, stack_masks
from graft.adapter import build_adapter
from graft.cloned import ClonedModel
from graft.head import build_extended_head
from graft.objective import ins_loss, kl_divergence
from localize.masks import MaskSet, binarize_topk
from localize.objective import loc_loss
from nets.zoo import build_mlp
from surrogates.kernel import locality_weights
from surrogates.local_model import design_matrix, weighted_ridge
from surrogates.model_set import fit_set

logger = structlog.get_logger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _param(rng: np.random.Generator, *dims: int, lo: float = -1.0, hi: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(lo, hi, size=dims), requires_grad=True)


def _scalarize(out_fn: Callable[[], Tensor], rng: np.random.Generator) -> Callable[[], Tensor]:
    """sum(out * r) with one fixed random r, so every output entry gets its own weight."""
    with no_grad():
        dims = out_fn().dims
    if not dims:
        return out_fn
    weights = Tensor(rng.normal(size=dims))
    return lambda: ops.sum(ops.mul(out_fn(), weights))


def primitive_checks(seed: int) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    a, b = _param(rng, 3, 4), _param(rng, 3, 4)
    m = _param(rng, 4, 5)
    x4 = _param(rng, 2, 3, 6, 6)
    w4 = _param(rng, 4, 3, 3, 3)
    bias4 = _param(rng, 4)
    wl, bl = _param(rng, 5, 4), _param(rng, 5)
    cases: dict[str, tuple[Callable[[], Tensor], list[Tensor]]] = {
        "add": (lambda: ops.add(a, b), [a, b]),
        "sub": (lambda: ops.sub(a, b), [a, b]),
        "mul": (lambda: ops.mul(a, b), [a, b]),
        "scale": (lambda: ops.scale(a, 1.7), [a]),
        "relu": (lambda: ops.relu(a), [a]),
        "sigmoid": (lambda: ops.sigmoid(a), [a]),
        "log_sigmoid": (lambda: ops.log_sigmoid(a), [a]),
        "matmul": (lambda: ops.matmul(a, m), [a, m]),
        "linear": (lambda: ops.linear(a, wl, bl), [a, wl, bl]),
        "conv2d": (lambda: ops.conv2d(x4, w4, bias4), [x4, w4, bias4]),
        "pad2d": (lambda: ops.pad2d(x4, 1), [x4]),
        "maxpool2x2": (lambda: ops.maxpool2x2(x4), [x4]),
        "adaptive_avgpool2d": (lambda: ops.adaptive_avgpool2d(x4, (4, 4)), [x4]),
        "flatten": (lambda: ops.flatten(x4), [x4]),
        "concat": (lambda: ops.concat([a, b], axis=1), [a, b]),
        "take": (lambda: ops.take(a, [2, 0], axis=1), [a]),
        "sum": (lambda: ops.sum(a, axis=0), [a]),
        "mean": (lambda: ops.mean(ops.mul(a, b)), [a, b]),
        "sum_of_squares": (lambda: ops.sum_of_squares(a), [a]),
        "softmax": (lambda: ops.softmax(a, axis=1), [a]),
        "log_softmax": (lambda: ops.log_softmax(a, axis=1), [a]),
        "logsumexp": (lambda: ops.logsumexp(a, axis=1), [a]),
    }
    results = []
    for name, (out_fn, params) in cases.items():
        check = check_gradients(_scalarize(out_fn, rng), params, name=name)
        results.append(CheckResult(f"grad.{name}", check.passed, check.to_dict()))
    return results


@dataclass
class ToyClone:
    target: Any
    source: Any
    grid: PatchGrid
    anchors: np.ndarray
    surrogates: Any


def toy_clone(seed: int, cloned: tuple[int, ...] = (2, 3)) -> ToyClone:
    """Two tiny mlp networks over 4x4 images and a 2x2 patch grid."""
    rng = np.random.default_rng(seed)
    target = build_mlp(2, seed, classes=[0, 1], input_shape=(1, 4, 4), hidden=(6, 5))
    source = build_mlp(3, seed + 1, classes=[2, 3, 4], input_shape=(1, 4, 4), hidden=(6, 5))
    grid = PatchGrid(2, 2, 4, 4)
    anchors = rng.uniform(0.0, 1.0, size=(3, 1, 4, 4))
    masks = stack_masks(gen_masks(grid.num_patches, 8, rng))
    surrogates = fit_set(source, anchors, masks, grid, list(cloned))
    return ToyClone(target, source, grid, anchors, surrogates)


def objective_checks(seed: int) -> list[CheckResult]:
    toy = toy_clone(seed)
    rng = np.random.default_rng(seed + 7)
    positions = np.array([0, 1, 2, 1])
    bits = toy.surrogates.masks[[0, 3, 5, 7]]

    masks = MaskSet.from_soft([rng.uniform(0.2, 0.8, size=w) for w in toy.source.mask_widths], [3, 3])
    loc = check_gradients(
        lambda: loc_loss(toy.source, masks, toy.surrogates, toy.anchors, positions, bits),
        masks.trainable(),
        name="loc_loss",
    )

    for position in range(toy.source.num_blocks):
        adapter = build_adapter(toy.target.block_input_dims(position), toy.source.block_input_dims(position), rng)
        # keep the adapter ReLU off its kink at zero-valued (masked) inputs
        adapter.bias.data = rng.uniform(0.1, 0.3, size=adapter.bias.dims)
        head = build_extended_head(toy.target.head, toy.source.feature_width, 2, rng, init_std=0.3)
        c = ClonedModel(toy.target, toy.source, masks, position, adapter, head, [2, 3])
        ins = check_gradients(
            lambda c=c: ins_loss(c, toy.surrogates, toy.anchors, positions, bits),
            c.trainable_parameters(),
            name=f"ins_loss.R{position}",
        )
        if not ins.passed:
            break
    return [
        CheckResult("grad.loc_loss", loc.passed, loc.to_dict()),
        CheckResult("grad.ins_loss", ins.passed, ins.to_dict()),
    ]


def kl_checks(seed: int, trials: int = 1000) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst_self, worst_negative = 0.0, 0.0
    for _ in range(trials):
        width = int(rng.integers(2, 11))
        p = rng.normal(scale=3.0, size=(1, width))
        q = rng.normal(scale=3.0, size=(1, width))
        with no_grad():
            worst_self = max(worst_self, abs(kl_divergence(p, Tensor(p)).item()))
            worst_negative = min(worst_negative, kl_divergence(p, Tensor(q)).item())
    return [
        CheckResult("kl.self_is_zero", worst_self == 0.0, {"trials": trials, "max_abs": worst_self}),
        CheckResult("kl.nonnegative", worst_negative >= 0.0, {"trials": trials, "min": worst_negative}),
    ]


def ridge_checks(seed: int, trials: int = 20) -> list[CheckResult]:
    """weighted_ridge against an independent normal-equation solve via lstsq on the square-root-weighted system."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        patches = int(rng.integers(2, 10))
        bits = rng.integers(0, 2, size=(patches + 10, patches)).astype(np.float64)
        targets = rng.normal(size=(bits.shape[0], 3))
        lam = float(rng.uniform(1e-4, 1e-1))
        design = design_matrix(bits)
        row_w = locality_weights(bits, 0.5)
        got = weighted_ridge(design, targets, row_w, lam)
        root = np.sqrt(row_w)[:, None]
        penalty_rows = np.sqrt(lam) * np.eye(design.shape[1])[:-1]
        stacked = np.vstack([design * root, penalty_rows])
        rhs = np.vstack([targets * root, np.zeros((penalty_rows.shape[0], targets.shape[1]))])
        want = np.linalg.lstsq(stacked, rhs, rcond=None)[0]
        worst = max(worst, float(np.max(np.abs(got - want)) / max(np.max(np.abs(want)), 1e-300)))
    return [CheckResult("ridge.normal_equations", worst <= 1e-9, {"trials": trials, "max_rel": worst})]


def mask_checks(seed: int) -> list[CheckResult]:
    toy = toy_clone(seed)
    rng = np.random.default_rng(seed + 3)
    images = rng.uniform(size=(5, 1, 4, 4))
    full = MaskSet.full(toy.source.mask_widths)
    plain = toy.source.predict_logits(images)
    masked = toy.source.predict_logits(images, masks=full.forward_masks("binary"))

    soft = MaskSet.from_soft([np.round(rng.uniform(size=w), 1) for w in toy.source.mask_widths], [3, 2])
    once = binarize_topk(soft)
    twice = binarize_topk(once)
    exact = all(len(s) == c for s, c in zip(once.selected or [], once.budgets))

    adapter = build_adapter(toy.target.block_input_dims(1), toy.source.block_input_dims(1), rng)
    head = build_extended_head(toy.target.head, toy.source.feature_width, 2, rng)
    c = ClonedModel(toy.target, toy.source, once, 1, adapter, head, [2, 3])
    old = c.predict_logits(images)[:, c.old_columns]
    return [
        CheckResult("masks.full_is_identity", bool(np.array_equal(plain, masked))),
        CheckResult("masks.topk_exact_budget", exact, {"selected": once.selected}),
        CheckResult("masks.topk_idempotent", once.selected == twice.selected),
        CheckResult("graft.initial_old_logits", bool(np.array_equal(old, toy.target.predict_logits(images)))),
    ]


def run_selftest(seed: int = 0) -> list[CheckResult]:
    results: list[CheckResult] = []
    for group in (primitive_checks, objective_checks, kl_checks, ridge_checks, mask_checks):
        results.extend(group(seed))
    failed = [r.name for r in results if not r.passed]
    logger.info("cli.selftest.done", checks=len(results), failed=failed)
    return results
