"""Multiscale higher-order SVD: hierarchical Tucker approximation of dense tensors."""

__version__ = "0.1.0"

from .hosvd import TuckerFactors, core_property_check, hosvd_full, hosvd_truncated, reconstruct
from .linalg import rank_by_energy, svd
from .partition import GroundTruth, KMeans, PartitionSpec, RandomPartitioner, make_partition
from .tensor import (
    DenseTensor,
    fold,
    inner_product,
    mode_n_product,
    multi_mode_product,
    norm,
    unfold,
)
from .tree import MsTree, TreeConfig, build, cost_report, prune, prune_sweep, reconstruct_tree

__all__ = [
    "DenseTensor",
    "unfold",
    "fold",
    "mode_n_product",
    "multi_mode_product",
    "inner_product",
    "norm",
    "svd",
    "rank_by_energy",
    "TuckerFactors",
    "hosvd_full",
    "hosvd_truncated",
    "reconstruct",
    "core_property_check",
    "PartitionSpec",
    "KMeans",
    "RandomPartitioner",
    "GroundTruth",
    "make_partition",
    "TreeConfig",
    "MsTree",
    "build",
    "reconstruct_tree",
    "prune",
    "prune_sweep",
    "cost_report",
]
