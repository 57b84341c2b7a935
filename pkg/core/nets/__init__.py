"""Blocked CNN / MLP classifiers.

Modules:
    layers      -- Conv2d, Dense, Block
    network     -- NetworkModel with masked, prefix and suffix forward passes
    zoo         -- build_lenet, build_plaincnn, build_mlp and the architecture registry
    checkpoint  -- PNCM save/load
    train       -- supervised pre-training
"""

from nets.checkpoint import clone_network, load_checkpoint, network_from_bytes, save_checkpoint
from nets.layers import Block, Conv2d, Dense
from nets.network import CheckpointRef, NetworkModel, apply_mask
from nets.train import TrainingHistory, checkpoint_name, cross_entropy, ensure_pretrained, pretrain, pretrain_checkpoint
from nets.zoo import ARCHITECTURES, build, build_lenet, build_mlp, build_plaincnn

__all__ = [
    "ARCHITECTURES",
    "Block",
    "CheckpointRef",
    "Conv2d",
    "Dense",
    "NetworkModel",
    "TrainingHistory",
    "apply_mask",
    "build",
    "build_lenet",
    "build_mlp",
    "build_plaincnn",
    "checkpoint_name",
    "clone_network",
    "cross_entropy",
    "ensure_pretrained",
    "load_checkpoint",
    "network_from_bytes",
    "pretrain",
    "pretrain_checkpoint",
    "save_checkpoint",
]
