"""Fit the branch at one insertion position R and search R from L-1 down to 0.

Per R the adapter and the extended head start fresh; mask logits are
warm-started from the previous (larger) R in the sequential sweep. The chosen R
is the one with the least convergence value, ties going to the larger R.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import structlog

from autodiff.optim import SgdState, sgd_step
from autodiff.tensor import Tensor
from contracts.errors import ContractError, NumericError, TrainingError
from contracts.records import PositionRecord
from digits.dataset import LabeledDataset
from digits.patches import perturb_batch
from evaluation.metrics import accuracy
from graft.adapter import Adapter, build_adapter
from graft.cloned import ClonedModel
from graft.head import ExtendedHead, build_extended_head
from graft.objective import joint_loss
from localize.masks import MaskSet, binarize_topk
from nets.network import NetworkModel
from surrogates.model_set import LocalModelSet
from utils.run_config import RunConfig
from utils.seeding import substream
from utils.timer import timer

logger = structlog.get_logger(__name__)


@dataclass
class PositionFit:
    """Trained branch at one R: soft masks during training, binarized model for evaluation."""

    position: int
    model: ClonedModel
    soft_masks: MaskSet
    convergence_value: float
    initial_loss: float
    epoch_losses: list[float] = field(default_factory=list)
    record: PositionRecord | None = None


@dataclass
class SearchResult:
    position: int
    model: ClonedModel
    trace: list[PositionRecord]
    fits: list[PositionFit]


def candidate_positions(num_blocks: int, config: RunConfig) -> list[int]:
    """R = L-1 ... 0, or a single pinned position."""
    if config.position is not None:
        if config.position >= num_blocks:
            raise ContractError(f"position {config.position} outside 0..{num_blocks - 1}")
        return [config.position]
    if config.ablation == "no-insert":
        return [0]
    return list(range(num_blocks - 1, -1, -1))


def _trainable(tensors: list[Tensor]) -> list[Tensor]:
    for t in tensors:
        t.requires_grad = True
        t.grad = None
    return tensors


def fit_at_position(
    target: NetworkModel,
    source: NetworkModel,
    surrogates: LocalModelSet,
    masks: MaskSet,
    position: int,
    anchor_images: np.ndarray,
    config: RunConfig,
    negatives: np.ndarray | None = None,
    adapter: Adapter | None = None,
    head: ExtendedHead | None = None,
) -> PositionFit:
    """SGD on loc_loss + ins_loss (+ routing) over mask logits, adapter and head only.

    The convergence value is the mean minibatch loss of the final epoch; the initial
    loss is the first minibatch's loss before any update. With ``ablation="no-local"``
    the masks stay fixed and the localization term is dropped.

    Raises:
        ContractError: R is out of range or the surrogates do not match the cloned classes.
        TrainingError: the loss became non-finite (names R).
    """
    if not 0 <= position < min(source.num_blocks, target.num_blocks):
        raise ContractError(f"position {position} outside 0..{source.num_blocks - 1}")
    target.freeze()
    source.freeze()

    with_localization = config.ablation != "no-local"
    init_rng = substream(config.seed, f"init.R{position}")
    rng = substream(config.seed, f"training.R{position}")

    if adapter is None:
        adapter = build_adapter(target.block_input_dims(position), source.block_input_dims(position), init_rng)
    else:
        _trainable(adapter.parameters())
    if head is None:
        head = build_extended_head(
            target.head, source.feature_width, len(surrogates.classes), init_rng, config.head_init_std
        )
    else:
        _trainable(head.parameters())

    work_masks = masks.copy(trainable=False)
    work_masks.selected = None
    work_masks.active_from = position
    if with_localization:
        # blocks before R are outside the branch and receive no gradient
        for logits in work_masks.logits[position:]:
            logits.requires_grad = True
    cloned = ClonedModel(
        target=target,
        source=source,
        masks=work_masks,
        position=position,
        adapter=adapter,
        head=head,
        cloned_classes=list(surrogates.classes),
    )

    params = cloned.trainable_parameters(include_masks=with_localization)
    state = SgdState(learning_rate=config.lr, momentum=config.momentum)
    pool = surrogates.masks
    n = len(surrogates)
    initial_loss = float("nan")
    epoch_losses: list[float] = []

    with timer(f"graft.fit.R{position}") as t:
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            pairing = rng.integers(0, pool.shape[0], size=n)
            batch_losses = []
            for start in range(0, n, config.batch_size):
                positions = order[start:start + config.batch_size]
                bits = pool[pairing[start:start + config.batch_size]]
                negative_batch = None
                if negatives is not None and negatives.shape[0] > 0 and config.negative_ratio > 0:
                    count = max(1, int(round(config.negative_ratio * len(positions))))
                    picks = rng.integers(0, negatives.shape[0], size=count)
                    negative_bits = pool[rng.integers(0, pool.shape[0], size=count)]
                    negative_batch = perturb_batch(negatives[picks], negative_bits, surrogates.grid)
                try:
                    loss = joint_loss(
                        cloned,
                        surrogates,
                        anchor_images,
                        positions,
                        bits,
                        negatives=negative_batch,
                        penalty=config.budget_penalty,
                        route_weight=config.route_weight,
                        with_localization=with_localization,
                    )
                    loss.backward()
                except NumericError as exc:
                    raise TrainingError(f"insertion training diverged in epoch {epoch}: {exc}", position) from exc
                if not batch_losses and epoch == 0:
                    initial_loss = loss.item()
                sgd_step(params, state)
                batch_losses.append(loss.item())
            epoch_losses.append(float(np.mean(batch_losses)))
            logger.debug("graft.fit.epoch", position=position, epoch=epoch, loss=round(epoch_losses[-1], 6))

    convergence = epoch_losses[-1] if epoch_losses else float("nan")
    logger.info(
        "graft.fit.done",
        position=position,
        epochs=config.epochs,
        initial_loss=round(initial_loss, 6),
        convergence_value=round(convergence, 6),
        seconds=round(t.seconds, 2),
    )
    return PositionFit(
        position=position,
        model=finalize(cloned),
        soft_masks=work_masks,
        convergence_value=convergence,
        initial_loss=initial_loss,
        epoch_losses=epoch_losses,
    )


def finalize(c: ClonedModel) -> ClonedModel:
    """Binarized, frozen copy of *c* (masks top-k, adapter and head detached from training)."""
    binary = binarize_topk(c.masks)
    binary.active_from = c.position
    frozen_masks = binary.copy(trainable=False)
    adapter = Adapter(
        kind=c.adapter.kind,
        weight=c.adapter.weight.detach(),
        bias=c.adapter.bias.detach(),
        out_dims=c.adapter.out_dims,
    )
    head = ExtendedHead(*(t.detach() for t in c.head.parameters()))
    return ClonedModel(
        target=c.target,
        source=c.source,
        masks=frozen_masks,
        position=c.position,
        adapter=adapter,
        head=head,
        cloned_classes=list(c.cloned_classes),
        metadata=dict(c.metadata),
    )


def position_record(fit: PositionFit, test: LabeledDataset | None, batch_size: int = 500) -> PositionRecord:
    record = PositionRecord(
        position=fit.position,
        convergence_value=fit.convergence_value,
        initial_loss=fit.initial_loss,
        epoch_losses=list(fit.epoch_losses),
        selected=[list(s) for s in fit.model.masks.selected or []],
    )
    if test is not None:
        report = accuracy(fit.model, test, fit.model.class_map, fit.model.target.classes, batch_size)
        record.ori_acc = report.ori_acc
        record.tar_acc = report.tar_acc
        record.avg_acc = report.avg_acc
        record.macro_avg_acc = report.macro_avg_acc
    fit.record = record
    return record


def select_position(trace: list[PositionRecord]) -> int:
    """argmin of the convergence value; ties go to the larger R."""
    if not trace:
        raise ContractError("no position was searched")
    best = min(trace, key=lambda r: (r.convergence_value, -r.position))
    return best.position


def search_position(
    target: NetworkModel,
    source: NetworkModel,
    surrogates: LocalModelSet,
    initial_masks: MaskSet,
    anchor_images: np.ndarray,
    config: RunConfig,
    negatives: np.ndarray | None = None,
    test: LabeledDataset | None = None,
) -> SearchResult:
    """Run fit_at_position over the candidate positions and pick R*.

    Sequential mode warm-starts each R from the previous R's trained mask logits;
    ``parallel_sweep`` fits every R from *initial_masks* on a thread pool.
    The trace is ordered R = L-1 ... 0 in both modes.
    """
    if config.ablation == "no-local":
        initial_masks = MaskSet.full(source.mask_widths)
    positions = candidate_positions(min(source.num_blocks, target.num_blocks), config)

    def run(position: int, masks: MaskSet) -> PositionFit:
        fit = fit_at_position(target, source, surrogates, masks, position, anchor_images, config, negatives)
        position_record(fit, test, config.eval_batch)
        return fit

    if config.parallel_sweep and len(positions) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            fits = list(executor.map(lambda r: run(r, initial_masks), positions))
    else:
        fits = []
        masks = initial_masks
        for position in positions:
            fit = run(position, masks)
            fits.append(fit)
            if config.ablation != "no-local":
                masks = fit.soft_masks

    trace = [f.record for f in fits if f.record is not None]
    chosen = select_position(trace)
    model = next(f.model for f in fits if f.position == chosen)
    logger.info(
        "graft.search.done",
        positions=positions,
        chosen=chosen,
        convergence=[round(r.convergence_value, 6) for r in trace],
    )
    return SearchResult(position=chosen, model=model, trace=trace, fits=fits)
