"""MNIST ingestion, class splits and patch-wise perturbation.

Modules:
    idx      -- IDX file readers and load_mnist
    dataset  -- LabeledDataset, class_split, subsample, concat, batches
    patches  -- PatchGrid, PatchMask, gen_masks, perturb, perturb_batch
"""

from digits.dataset import LabeledDataset, batches, class_split, concat, remap_labels, subsample
from digits.idx import MnistData, load_mnist, read_idx_images, read_idx_labels
from digits.patches import PatchGrid, PatchMask, gen_masks, perturb, perturb_batch, stack_masks

__all__ = [
    "LabeledDataset",
    "MnistData",
    "PatchGrid",
    "PatchMask",
    "batches",
    "class_split",
    "concat",
    "gen_masks",
    "load_mnist",
    "perturb",
    "perturb_batch",
    "read_idx_images",
    "read_idx_labels",
    "remap_labels",
    "stack_masks",
    "subsample",
]
