"""Class-by-class similarity matrices from conditional surrogate similarity.

Source mode:  S[i, j] = sim(G(source | D_i), G(source | D_j)), symmetric with unit diagonal.
Module mode:  S[i, j] = sim(G(source | D_j), G(module_i | D_i)), where module_i is
the source under the binarized masks localized for class i.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import structlog

from contracts.errors import ContractError, DataError
from digits.dataset import LabeledDataset, class_split, subsample
from digits.patches import PatchGrid, gen_masks, stack_masks
from localize.masks import MaskSet, binarize_topk, default_budgets
from localize.trainer import train_masks
from nets.network import NetworkModel
from surrogates.local_model import slice_predictor
from surrogates.model_set import LocalModelSet, fit_set, sim_conditional
from utils.run_config import RunConfig
from utils.seeding import derive_seed, substream

logger = structlog.get_logger(__name__)


@dataclass
class SimilarityMatrix:
    values: np.ndarray
    labels: list[int]
    mode: str  # "source" | "module"

    def diagonal_gap(self) -> float:
        """mean(diagonal) - mean(off-diagonal)."""
        n = self.values.shape[0]
        diagonal = np.diag(self.values)
        if n < 2:
            return float("nan")
        off = self.values[~np.eye(n, dtype=bool)]
        return float(diagonal.mean() - off.mean())

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.values, self.values.T, rtol=0.0, atol=tol))

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "labels": self.labels,
            "values": self.values.tolist(),
            "diagonal_gap": self.diagonal_gap(),
        }


def similarity_matrix(
    source_sets: Sequence[LocalModelSet],
    labels: Sequence[int],
    module_sets: Sequence[LocalModelSet] | None = None,
) -> SimilarityMatrix:
    """Pairwise conditional similarity; module mode when *module_sets* is given.

    Raises:
        ContractError: the set lists and labels do not line up.
    """
    n = len(source_sets)
    if n != len(labels) or (module_sets is not None and len(module_sets) != n):
        raise ContractError(
            f"{n} source sets, {len(labels)} labels, {None if module_sets is None else len(module_sets)} module sets"
        )
    values = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if module_sets is None:
                values[i, j] = sim_conditional(source_sets[i], source_sets[j])
            else:
                values[i, j] = sim_conditional(source_sets[j], module_sets[i])
    mode = "source" if module_sets is None else "module"
    return SimilarityMatrix(values=values, labels=[int(c) for c in labels], mode=mode)


def per_class_anchors(train: LabeledDataset, label: int, config: RunConfig) -> np.ndarray:
    rng = substream(config.seed, f"similarity.data.{label}")
    sample = subsample(class_split(train, [label]), config.data_fraction, rng)
    if len(sample) == 0:
        raise DataError(f"no training samples for class {label}")
    return sample.images[: config.similarity_anchors]


def class_surrogates(
    source: NetworkModel,
    train: LabeledDataset,
    config: RunConfig,
    grid: PatchGrid,
    masks: np.ndarray,
) -> tuple[list[LocalModelSet], list[np.ndarray]]:
    """G(source | D_i) for every source class, over all source outputs."""
    sets, anchors = [], []
    for label in source.classes:
        images = per_class_anchors(train, label, config)
        sets.append(
            fit_set(
                source, images, masks, grid, source.classes,
                ridge_lambda=config.ridge_lambda, sigma=config.kernel_sigma, workers=config.workers,
                seed=derive_seed(config.seed, "masks"),
            )
        )
        anchors.append(images)
    return sets, anchors


def module_surrogates(
    source: NetworkModel,
    source_sets: Sequence[LocalModelSet],
    anchors: Sequence[np.ndarray],
    config: RunConfig,
) -> tuple[list[LocalModelSet], list[MaskSet]]:
    """Localize one module per class against its own logit, then fit G(module_i | D_i).

    Masks for class i are trained on surrogates of the class-i slice only, as in a
    clone of that single class; the module set is then fitted over every source
    output so it can be compared with the source sets.
    """
    widths = source.mask_widths
    budgets = list(config.budgets) if config.budgets is not None else default_budgets(widths, config.budget_fraction)
    sets, modules = [], []
    for label, g, images in zip(source.classes, source_sets, anchors):
        own = fit_set(
            source, images, g.masks, g.grid, [label],
            ridge_lambda=config.ridge_lambda, sigma=config.kernel_sigma, workers=config.workers,
            seed=g.seed, source_arch=source.arch,
        )
        soft = train_masks(
            source, own, images, budgets,
            steps=config.mask_steps, lr=config.mask_lr, seed=substream(config.seed, f"similarity.localize.{label}"),
            momentum=config.mask_momentum, batch_size=config.mask_batch, penalty=config.budget_penalty,
        )
        module = binarize_topk(soft)
        predictor = slice_predictor(source, g.classes, masks=module.binary_values(), batch_size=config.eval_batch)
        sets.append(
            fit_set(
                predictor, images, g.masks, g.grid, g.classes,
                ridge_lambda=config.ridge_lambda, sigma=config.kernel_sigma, workers=config.workers,
                seed=g.seed, source_arch=source.arch,
            )
        )
        modules.append(module)
        logger.info("evaluation.similarity.module", label=label, selected=[len(s) for s in module.selected or []])
    return sets, modules


def locality_matrices(
    source: NetworkModel,
    train: LabeledDataset,
    config: RunConfig,
) -> tuple[SimilarityMatrix, SimilarityMatrix]:
    """Source-mode and module-mode matrices over every class of *source*."""
    height, width = train.image_shape[-2:]
    grid = PatchGrid(config.grid_rows, config.grid_cols, height, width)
    masks = stack_masks(gen_masks(grid.num_patches, config.num_masks, substream(config.seed, "masks")))
    source_sets, anchors = class_surrogates(source, train, config, grid, masks)
    module_sets, _ = module_surrogates(source, source_sets, anchors, config)
    return (
        similarity_matrix(source_sets, source.classes),
        similarity_matrix(source_sets, source.classes, module_sets),
    )


def _heat_rgb(v: np.ndarray) -> np.ndarray:
    """White (low) to dark blue (high); deeper colour means higher similarity."""
    t = np.clip(v, 0.0, 1.0)[..., None]
    low = np.array([255.0, 255.0, 255.0])
    high = np.array([8.0, 48.0, 107.0])
    return np.rint(low + (high - low) * t).astype(np.uint8)


def write_heat_image(matrix: SimilarityMatrix, path: str | Path, cell: int = 24) -> int:
    """Write the matrix as a binary PPM (``.ppm``) or greyscale PGM (any other suffix)."""
    lo, hi = float(matrix.values.min()), float(matrix.values.max())
    scaled = (matrix.values - lo) / (hi - lo) if hi > lo else np.ones_like(matrix.values)
    scaled = np.kron(scaled, np.ones((cell, cell)))
    height, width = scaled.shape
    target = Path(path)
    if target.suffix.lower() == ".ppm":
        pixels = _heat_rgb(scaled).tobytes()
        header = f"P6\n{width} {height}\n255\n".encode("ascii")
    else:
        pixels = np.rint(255.0 * (1.0 - scaled)).astype(np.uint8).tobytes()
        header = f"P5\n{width} {height}\n255\n".encode("ascii")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(header + pixels)
    return len(header) + len(pixels)
