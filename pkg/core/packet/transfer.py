"""pack / unpack / attach / detach / repair.

A packet only carries {M, R, A, F_c}; the receiver rebuilds the cloned model
from zoo checkpoints whose FNV-1a digests match the packet.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import structlog

from autodiff.tensor import Tensor
from contracts.errors import ContractError, ProvenanceError, ZooError
from graft.adapter import Adapter, adapter_from_tensors
from graft.cloned import ClonedModel
from graft.head import head_from_tensors
from graft.search import PositionFit, fit_at_position
from localize.masks import MaskSet
from nets.checkpoint import load_checkpoint
from nets.network import NetworkModel
from packet.codec import ClonePacket, ModelRef, read_packet, write_packet
from surrogates.model_set import LocalModelSet
from utils.run_config import RunConfig

logger = structlog.get_logger(__name__)


def _ref(net: NetworkModel, role: str) -> ModelRef:
    if net.origin is None:
        raise ContractError(f"{role} network has no checkpoint origin; load it from a PNCM file before packing")
    return ModelRef(arch=net.arch, name=net.origin.name, digest=net.origin.digest, size=net.origin.size)


def to_packet(c: ClonedModel) -> ClonePacket:
    """Raises ContractError for unbinarized masks or networks without a checkpoint origin."""
    if not c.masks.is_binary or c.masks.selected is None:
        raise ContractError("cannot pack a cloned model whose masks are not binarized")
    tensors = c.adapter.packet_tensors()
    tensors.update(c.head.packet_tensors())
    return ClonePacket(
        source=_ref(c.source, "source"),
        target=_ref(c.target, "target"),
        position=c.position,
        selected=[list(s) for s in c.masks.selected],
        adapter=c.adapter.spec(),
        target_classes=list(c.target.classes),
        cloned_classes=list(c.cloned_classes),
        tensors=tensors,
        metadata=dict(c.metadata),
    )


def pack(c: ClonedModel, path: str | Path) -> int:
    """Write the packet for *c*; returns its size in bytes."""
    size = write_packet(to_packet(c), path)
    logger.info("packet.packed", path=str(path), position=c.position, bytes=size)
    return size


def _check_binding(net: NetworkModel, ref: ModelRef, role: str) -> None:
    if net.arch != ref.arch:
        raise ProvenanceError(f"{role} architecture {net.arch!r} does not match packet's {ref.arch!r}")
    if net.origin is None:
        raise ProvenanceError(
            f"{role} network has no checkpoint origin; cannot verify digest {ref.digest} ({ref.name})"
        )
    if net.origin.digest != ref.digest:
        raise ProvenanceError(
            f"{role} checkpoint digest {net.origin.digest} does not match packet's {ref.digest} ({ref.name})"
        )


def attach(packet: ClonePacket, target: NetworkModel, source: NetworkModel) -> ClonedModel:
    """Rebuild the cloned model on in-memory networks.

    Raises:
        ProvenanceError: architecture or digest mismatch, or a network not loaded from a checkpoint.
        ContractError: the target's classes differ from the packet's.
    """
    _check_binding(target, packet.target, "target")
    _check_binding(source, packet.source, "source")
    if list(target.classes) != packet.target_classes:
        raise ContractError(f"target classes {target.classes} differ from packet's {packet.target_classes}")
    masks = MaskSet.from_selected(source.mask_widths, packet.selected, active_from=packet.position)
    adapter = adapter_from_tensors(
        packet.adapter, packet.tensors["adapter.weight"], packet.tensors["adapter.bias"]
    )
    head = head_from_tensors(
        packet.tensors["head.weight"],
        packet.tensors["head.bias"],
        num_old=len(packet.target_classes),
        trunk_width=target.feature_width,
    )
    return ClonedModel(
        target=target.freeze(),
        source=source.freeze(),
        masks=masks,
        position=packet.position,
        adapter=adapter,
        head=head,
        cloned_classes=list(packet.cloned_classes),
        metadata=dict(packet.metadata),
    )


def load_from_zoo(ref: ModelRef, zoo_dir: str | Path) -> NetworkModel:
    """Raises ZooError if the checkpoint is missing, ProvenanceError if its digest differs."""
    path = Path(zoo_dir) / ref.name
    if not path.is_file():
        raise ZooError(f"checkpoint {ref.name} (digest {ref.digest}) not found in zoo {zoo_dir}")
    net = load_checkpoint(path)
    _check_binding(net, ref, ref.name)
    return net


def unpack(path: str | Path, zoo_dir: str | Path) -> ClonedModel:
    packet = read_packet(path)
    target = load_from_zoo(packet.target, zoo_dir)
    source = load_from_zoo(packet.source, zoo_dir)
    c = attach(packet, target, source)
    logger.info("packet.unpacked", path=str(path), position=c.position, cloned=c.cloned_classes)
    return c


def detach(c: ClonedModel) -> NetworkModel:
    """The target network, untouched; the branch, adapter and head are dropped."""
    return c.target


def repair(
    c: ClonedModel,
    surrogates: LocalModelSet,
    anchor_images: np.ndarray,
    config: RunConfig,
    negatives: np.ndarray | None = None,
) -> PositionFit:
    """Re-fit masks, adapter and head at the model's own R on the receiver's D_t.

    Starts from the received parameters (copies; *c* is not modified).
    """
    adapter = Adapter(
        kind=c.adapter.kind,
        weight=Tensor(c.adapter.weight.data.copy(), name="adapter.weight"),
        bias=Tensor(c.adapter.bias.data.copy(), name="adapter.bias"),
        out_dims=c.adapter.out_dims,
    )
    weight, bias = c.head.merged()
    head = head_from_tensors(weight, bias, num_old=c.head.num_old, trunk_width=c.head.trunk_width)
    fit = fit_at_position(
        c.target,
        c.source,
        surrogates,
        c.masks,
        c.position,
        anchor_images,
        config.updated(position=c.position),
        negatives=negatives,
        adapter=adapter,
        head=head,
    )
    fit.model.metadata = dict(c.metadata, repaired=True)
    logger.info("packet.repaired", position=c.position, convergence_value=round(fit.convergence_value, 6))
    return fit
