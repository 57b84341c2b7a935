"""End-to-end cloning: load -> data -> surrogates -> localize -> search -> finalize -> evaluate -> pack.

Every stage runs inside :func:`stage`, which logs its duration and re-raises any
PncError as a StageError naming the stage. ``prepare_context`` covers the stages
that do not depend on budgets or positions, so sweeps fit the surrogates once.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

import numpy as np
import structlog

from contracts.errors import ContractError, PncError, StageError
from contracts.records import AccuracyReport, SurrogateSummary
from digits.dataset import LabeledDataset, class_split, subsample
from digits.idx import MnistData, load_mnist
from digits.patches import PatchGrid, gen_masks, stack_masks
from evaluation.metrics import accuracy, direct_ensemble_accuracy
from evaluation.stats import AggregateStats
from graft.cloned import ClonedModel
from graft.search import SearchResult, search_position
from localize.masks import MaskSet, default_budgets
from localize.trainer import train_masks
from nets.checkpoint import load_checkpoint
from nets.network import NetworkModel
from packet.codec import ClonePacket, packet_bytes
from packet.transfer import pack, to_packet
from surrogates.model_set import LocalModelSet, fidelity_per_anchor, fit_set
from utils.run_config import RunConfig
from utils.seeding import derive_seed, substream
from utils.timer import timer

logger = structlog.get_logger(__name__)

STAGES = ("load", "data", "surrogates", "localize", "search", "finalize", "evaluate", "pack")


@contextmanager
def stage(name: str) -> Iterator[None]:
    with timer(f"graft.clone.{name}") as t:
        try:
            yield
        except StageError:
            raise
        except PncError as exc:
            logger.error("graft.clone.stage_failed", stage=name, error=type(exc).__name__, message=str(exc))
            raise StageError(name, exc) from exc
    logger.info("graft.clone.stage", stage=name, seconds=round(t.seconds, 2))


@dataclass
class CloneContext:
    """Everything the budget- and position-dependent stages reuse."""

    target: NetworkModel
    source: NetworkModel
    cloned_classes: list[int]
    anchors: LabeledDataset
    negatives: LabeledDataset | None
    test: LabeledDataset
    grid: PatchGrid
    surrogates: LocalModelSet
    heldout: np.ndarray
    surrogate_summary: SurrogateSummary

    @property
    def negative_images(self) -> np.ndarray | None:
        return None if self.negatives is None else self.negatives.images


@dataclass
class CloneOutcome:
    model: ClonedModel
    search: SearchResult
    masks: MaskSet
    final: AccuracyReport
    direct_ensemble: AccuracyReport
    target_accuracy: AccuracyReport


def summarize_surrogates(
    surrogates: LocalModelSet,
    source: NetworkModel,
    anchor_images: np.ndarray,
    heldout: np.ndarray,
) -> SurrogateSummary:
    per_anchor = fidelity_per_anchor(surrogates, source, anchor_images, heldout)
    return SurrogateSummary(
        anchors=len(surrogates),
        masks=int(surrogates.masks.shape[0]),
        heldout_masks=int(heldout.shape[0]),
        residuals=AggregateStats.from_values("residual", surrogates.residuals().tolist()).to_dict(),
        fidelity=AggregateStats.from_values("fidelity", per_anchor.tolist()).to_dict(),
        fidelity_per_anchor=per_anchor.tolist(),
    )


def prepare_context(
    config: RunConfig,
    target: NetworkModel,
    source: NetworkModel,
    mnist: MnistData | None = None,
) -> CloneContext:
    """Run the data and surrogates stages.

    Raises:
        StageError: wrapping the failing stage's error.
    """
    with stage("data"):
        if list(target.classes) != list(config.target_classes):
            raise ContractError(f"target checkpoint covers {target.classes}, config says {config.target_classes}")
        source.class_columns(config.cloned_classes)
        mnist = mnist if mnist is not None else load_mnist(config.data_dir)
        anchors = subsample(
            class_split(mnist.train, config.cloned_classes), config.data_fraction, substream(config.seed, "data")
        )
        negatives = None
        if config.rest_classes and config.negative_ratio > 0:
            negatives = subsample(
                class_split(mnist.train, config.rest_classes),
                config.data_fraction,
                substream(config.seed, "data.negatives"),
            )
        test = class_split(mnist.test, list(config.target_classes) + list(config.cloned_classes))
        logger.info(
            "graft.clone.data",
            anchors=len(anchors),
            negatives=0 if negatives is None else len(negatives),
            test=len(test),
            fraction=config.data_fraction,
        )

    with stage("surrogates"):
        height, width = anchors.image_shape[-2:]
        grid = PatchGrid(config.grid_rows, config.grid_cols, height, width)
        masks = stack_masks(gen_masks(grid.num_patches, config.num_masks, substream(config.seed, "masks")))
        heldout = stack_masks(gen_masks(grid.num_patches, config.heldout_masks, substream(config.seed, "heldout")))
        surrogates = fit_set(
            source,
            anchors.images,
            masks,
            grid,
            config.cloned_classes,
            ridge_lambda=config.ridge_lambda,
            sigma=config.kernel_sigma,
            workers=config.workers,
            seed=derive_seed(config.seed, "masks"),
            source_arch=source.arch,
        )
        summary = summarize_surrogates(surrogates, source, anchors.images, heldout)

    return CloneContext(
        target=target,
        source=source,
        cloned_classes=list(config.cloned_classes),
        anchors=anchors,
        negatives=negatives,
        test=test,
        grid=grid,
        surrogates=surrogates,
        heldout=heldout,
        surrogate_summary=summary,
    )


def localize_masks(context: CloneContext, config: RunConfig) -> MaskSet:
    """Initial soft masks: trained against G, or full masks for the no-local ablation."""
    widths = context.source.mask_widths
    if config.ablation == "no-local":
        return MaskSet.full(widths)
    budgets = list(config.budgets) if config.budgets is not None else default_budgets(widths, config.budget_fraction)
    if len(budgets) != len(widths):
        raise ContractError(f"{len(budgets)} budgets for {len(widths)} source blocks")
    return train_masks(
        context.source,
        context.surrogates,
        context.anchors.images,
        budgets,
        steps=config.mask_steps,
        lr=config.mask_lr,
        seed=substream(config.seed, "localize"),
        momentum=config.mask_momentum,
        batch_size=config.mask_batch,
        penalty=config.budget_penalty,
    )


def run_clone(context: CloneContext, config: RunConfig) -> CloneOutcome:
    """Localize, search R, finalize and evaluate on a prepared context."""
    with stage("localize"):
        masks = localize_masks(context, config)

    with stage("search"):
        result = search_position(
            context.target,
            context.source,
            context.surrogates,
            masks,
            context.anchors.images,
            config,
            negatives=context.negative_images,
            test=context.test,
        )

    with stage("finalize"):
        model = result.model
        if not model.masks.is_binary:
            raise ContractError("search returned unbinarized masks")
        model.metadata = {"seed": config.seed, "config_digest": config.digest(), "ablation": config.ablation}

    with stage("evaluate"):
        final = accuracy(model, context.test, model.class_map, context.target.classes, config.eval_batch)
        ensemble = direct_ensemble_accuracy(
            context.target, context.source, context.cloned_classes, context.test, config.eval_batch
        )
        original_test = context.test.select(np.flatnonzero(np.isin(context.test.labels, context.target.classes)))
        target_only = accuracy(context.target, original_test, context.target.classes, batch_size=config.eval_batch)
        logger.info(
            "graft.clone.evaluated",
            position=model.position,
            ori=final.ori_acc,
            tar=final.tar_acc,
            avg=final.avg_acc,
        )

    return CloneOutcome(
        model=model,
        search=result,
        masks=masks,
        final=final,
        direct_ensemble=ensemble,
        target_accuracy=target_only,
    )


def _model_info(net: NetworkModel) -> dict[str, Any]:
    info: dict[str, Any] = {"arch": net.arch, "classes": list(net.classes)}
    if net.origin is not None:
        info.update(name=net.origin.name, digest=net.origin.digest, bytes=net.origin.size)
    return info


def build_report(
    context: CloneContext,
    outcome: CloneOutcome,
    config: RunConfig,
    packet_size: int | None = None,
) -> dict[str, Any]:
    """JSON-ready clone report; only ``timestamp`` varies between identical runs."""
    source_size = context.source.origin.size if context.source.origin is not None else None
    history = outcome.masks.history
    return {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": config.echo(),
        "config_digest": config.digest(),
        "seeds": {name: derive_seed(config.seed, name) for name in ("data", "masks", "heldout", "localize")},
        "data_budget": config.data_fraction,
        "data": {
            "anchors": len(context.anchors),
            "negatives": 0 if context.negatives is None else len(context.negatives),
            "test": len(context.test),
        },
        "target": _model_info(context.target),
        "source": _model_info(context.source),
        "cloned_classes": list(context.cloned_classes),
        "surrogates": context.surrogate_summary.to_dict(),
        "localization": {
            "budgets": list(outcome.masks.budgets),
            "steps": len(history),
            "initial_loss": history[0] if history else None,
            "final_loss": history[-1] if history else None,
        },
        "trace": [record.to_dict() for record in outcome.search.trace],
        "chosen_position": outcome.search.position,
        "selected": outcome.model.masks.selected,
        "final": outcome.final.to_dict(),
        "direct_ensemble": outcome.direct_ensemble.to_dict(),
        "target_before": outcome.target_accuracy.to_dict(),
        "packet": {
            "bytes": packet_size,
            "ratio_to_source": packet_size / source_size if packet_size and source_size else None,
        },
    }


def clone(
    config: RunConfig,
    target_path: str | Path,
    source_path: str | Path,
    packet_path: str | Path | None = None,
    mnist: MnistData | None = None,
) -> tuple[ClonedModel, ClonePacket, dict[str, Any]]:
    """Clone ``config.cloned_classes`` from the source checkpoint into the target checkpoint.

    Writes the packet to *packet_path* when given; the report always records its size.

    Raises:
        StageError: any stage's error, annotated with the stage name.
    """
    logger.info("graft.clone.start", target=str(target_path), source=str(source_path), classes=config.cloned_classes)
    with stage("load"):
        target = load_checkpoint(target_path)
        source = load_checkpoint(source_path)

    context = prepare_context(config, target, source, mnist)
    outcome = run_clone(context, config)

    with stage("pack"):
        packet = to_packet(outcome.model)
        size = pack(outcome.model, packet_path) if packet_path is not None else len(packet_bytes(packet))

    report = build_report(context, outcome, config, size)
    logger.info(
        "graft.clone.done",
        position=outcome.search.position,
        avg=outcome.final.avg_acc,
        packet_bytes=size,
    )
    return outcome.model, packet, report
