"""The local model set G: one surrogate per anchor, persisted as a PNCG file."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import structlog

from contracts.errors import CheckpointFormatError, ContractError, DataError, NumericError, ShapeError
from contracts.wire import Container, read_container, write_container
from digits.patches import PatchGrid
from nets.network import NetworkModel
from surrogates.kernel import DEFAULT_SIGMA
from surrogates.local_model import LocalModel, Predictor, fidelity, fit_local_model, slice_predictor
from utils.timer import timer

logger = structlog.get_logger(__name__)

SURROGATE_MAGIC = b"PNCG"
SURROGATE_VERSION = 1


@dataclass
class LocalModelSet:
    """Surrogates sharing one grid, one mask set B and one output class list."""

    grid: PatchGrid
    masks: np.ndarray
    models: list[LocalModel]
    classes: list[int]
    source_arch: str = ""
    ridge_lambda: float = 1e-3
    sigma: float = DEFAULT_SIGMA
    seed: int = 0
    _stack: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.masks.ndim != 2 or self.masks.shape[1] != self.grid.num_patches:
            raise ShapeError("LocalModelSet", f"masks {self.masks.shape} vs {self.grid.num_patches} patches")
        for g in self.models:
            if g.num_patches != self.grid.num_patches or g.classes != self.classes:
                raise ContractError(f"local model {g.anchor_id} does not share P and the class list")

    def __len__(self) -> int:
        return len(self.models)

    @property
    def num_patches(self) -> int:
        return self.grid.num_patches

    @property
    def output_width(self) -> int:
        return len(self.classes)

    def weight_stack(self) -> np.ndarray:
        """(N, P+1, C_out)."""
        if self._stack is None:
            self._stack = np.stack([g.weights for g in self.models])
        return self._stack

    def mean_weights(self) -> np.ndarray:
        return self.weight_stack().mean(axis=0)

    def residuals(self) -> np.ndarray:
        return np.array([g.residual for g in self.models])

    def predict_batch(self, positions: np.ndarray, bits: np.ndarray) -> np.ndarray:
        """Row-wise ``predict(models[positions[k]], bits[k])`` as a (B, C_out) array."""
        stack = self.weight_stack()[np.asarray(positions, dtype=np.int64)]
        bits = np.asarray(bits, dtype=np.float64)
        return np.einsum("bp,bpc->bc", bits, stack[:, :-1, :]) + stack[:, -1, :]


def fit_set(
    net: NetworkModel | Predictor,
    images: np.ndarray,
    masks: np.ndarray,
    grid: PatchGrid,
    class_list: Sequence[int],
    ridge_lambda: float = 1e-3,
    sigma: float = DEFAULT_SIGMA,
    workers: int = 1,
    seed: int = 0,
    source_arch: str | None = None,
) -> LocalModelSet:
    """One local model per anchor image, in anchor order.

    Anchors are fitted concurrently when ``workers > 1``; results keep anchor
    order, so serial and parallel runs agree bit for bit.
    """
    if images.shape[0] == 0:
        raise DataError("fit_set needs at least one anchor")
    predictor = slice_predictor(net, class_list) if isinstance(net, NetworkModel) else net
    arch = source_arch if source_arch is not None else getattr(net, "arch", "")

    def fit_one(i: int) -> LocalModel:
        return fit_local_model(predictor, images[i], masks, grid, class_list, ridge_lambda, sigma, anchor_id=i)

    with timer("surrogates.fit_set") as t:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                models = list(pool.map(fit_one, range(images.shape[0])))
        else:
            models = [fit_one(i) for i in range(images.shape[0])]
    logger.info(
        "surrogates.fit_set.done",
        anchors=len(models),
        masks=int(masks.shape[0]),
        classes=list(class_list),
        workers=workers,
        seconds=round(t.seconds, 2),
    )
    return LocalModelSet(
        grid=grid,
        masks=np.asarray(masks, dtype=np.float64),
        models=models,
        classes=list(class_list),
        source_arch=arch,
        ridge_lambda=ridge_lambda,
        sigma=sigma,
        seed=seed,
    )


def fidelity_per_anchor(
    model_set: LocalModelSet,
    net: NetworkModel | Predictor,
    images: np.ndarray,
    heldout: np.ndarray,
) -> np.ndarray:
    predictor = slice_predictor(net, model_set.classes) if isinstance(net, NetworkModel) else net
    return np.array(
        [fidelity(g, predictor, images[g.anchor_id], heldout, model_set.grid) for g in model_set.models]
    )


def sim_conditional(ga: LocalModelSet, gb: LocalModelSet) -> float:
    """Cosine similarity of the two sets' flattened mean weight matrices.

    Raises:
        ShapeError: different patch counts or output widths.
        NumericError: a mean matrix has zero norm.
    """
    if ga.num_patches != gb.num_patches or ga.output_width != gb.output_width:
        raise ShapeError(
            "sim_conditional",
            f"P {ga.num_patches} vs {gb.num_patches}, width {ga.output_width} vs {gb.output_width}",
        )
    a = ga.mean_weights().reshape(-1)
    b = gb.mean_weights().reshape(-1)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise NumericError("similarity undefined for a zero-norm surrogate set")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


# -- persistence ---------------------------------------------------------------


def model_set_container(model_set: LocalModelSet) -> Container:
    header: dict[str, Any] = {
        "grid": model_set.grid.to_dict(),
        "classes": model_set.classes,
        "ridge_lambda": model_set.ridge_lambda,
        "sigma": model_set.sigma,
        "seed": model_set.seed,
        "source_arch": model_set.source_arch,
        "anchor_ids": [g.anchor_id for g in model_set.models],
        "residuals": [g.residual for g in model_set.models],
    }
    tensors = {"masks": model_set.masks}
    tensors.update({f"model.{i}": g.weights for i, g in enumerate(model_set.models)})
    return Container(SURROGATE_MAGIC, SURROGATE_VERSION, header, tensors)


def save_model_set(model_set: LocalModelSet, path: str | Path) -> int:
    size = write_container(path, model_set_container(model_set))
    logger.info("surrogates.saved", path=str(path), models=len(model_set), bytes=size)
    return size


def load_model_set(path: str | Path) -> LocalModelSet:
    container = read_container(path, SURROGATE_MAGIC, SURROGATE_VERSION, error=CheckpointFormatError)
    header = container.header
    try:
        grid = PatchGrid(**header["grid"])
        classes = [int(c) for c in header["classes"]]
        anchor_ids = [int(a) for a in header["anchor_ids"]]
        residuals = [float(r) for r in header["residuals"]]
        models = [
            LocalModel(anchor_id=a, weights=container.tensors[f"model.{i}"], classes=classes, residual=r)
            for i, (a, r) in enumerate(zip(anchor_ids, residuals))
        ]
        masks = container.tensors["masks"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: incomplete surrogate file ({exc})") from exc
    return LocalModelSet(
        grid=grid,
        masks=masks,
        models=models,
        classes=classes,
        source_arch=str(header.get("source_arch", "")),
        ridge_lambda=float(header.get("ridge_lambda", 1e-3)),
        sigma=float(header.get("sigma", DEFAULT_SIGMA)),
        seed=int(header.get("seed", 0)),
    )
