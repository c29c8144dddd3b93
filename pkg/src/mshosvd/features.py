"""Two-scale projection features for supervised classification.

Samples sit along the last mode, which is never projected or partitioned.
Scale-0 features project every sample onto the leading singular vectors of
the other modes.  The scale-0 residual is then split into blocks along the
non-sample modes, and each block is projected onto its own full set of
singular vectors to give the scale-1 features.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .linalg import rank_by_energy, svd
from .partition import KMeans, Partitioner, PartitionSpec, make_partition
from .tensor import TensorLike, as_tensor, mode_dot_array, unfold_array
from .tree import partitioner_from_dict, partitioner_to_dict

__all__ = [
    "FeatureModel",
    "fit_features",
    "transform",
    "fisher_score",
    "knn1_classify",
    "naive_bayes_classify",
]

FISHER_SENTINEL = float(np.finfo(np.float64).max)
VARIANCE_FLOOR = 1e-9


@dataclass(frozen=True)
class FeatureModel:
    """Everything needed to map new samples onto the training features."""

    sample_shape: tuple
    root_factors: tuple
    partition: PartitionSpec
    block_factors: tuple
    selected: np.ndarray
    scores: np.ndarray
    partitioner: Partitioner

    @property
    def n_raw_features(self) -> int:
        return int(self.scores.size)

    def to_json(self) -> str:
        return json.dumps(
            {
                "sample_shape": list(self.sample_shape),
                "root_factors": [u.tolist() for u in self.root_factors],
                "partition": [lab.tolist() for lab in self.partition.labels],
                "block_factors": [[v.tolist() for v in blk] for blk in self.block_factors],
                "selected": self.selected.tolist(),
                "scores": self.scores.tolist(),
                "partitioner": partitioner_to_dict(self.partitioner),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "FeatureModel":
        d = json.loads(text)
        return cls(
            tuple(d["sample_shape"]),
            tuple(np.array(u, dtype=np.float64).reshape(n, -1) for u, n in zip(d["root_factors"], d["sample_shape"])),
            PartitionSpec(tuple(d["partition"])),
            tuple(
                tuple(np.array(v, dtype=np.float64) for v in blk) for blk in d["block_factors"]
            ),
            np.asarray(d["selected"], dtype=np.int64),
            np.asarray(d["scores"], dtype=np.float64),
            partitioner_from_dict(d["partitioner"]),
        )


def _check_labels(labels, n: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or y.size != n:
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise ValueError("at least two classes are required")
    if counts.min() < 2:
        raise ValueError("every class needs at least two samples")
    return y


def fisher_score(features, labels) -> np.ndarray:
    """Between-class over within-class variance for every feature column.

    ``sum_c n_c (mu_c - mu)^2 / sum_c n_c var_c`` with population variances.
    A feature constant across samples scores 0; one that is constant within
    every class but differs between classes scores ``FISHER_SENTINEL``.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError("features must be a (samples, features) matrix")
    y = _check_labels(labels, f.shape[0])
    mu = f.mean(axis=0)
    between = np.zeros(f.shape[1])
    within = np.zeros(f.shape[1])
    for c in np.unique(y):
        fc = f[y == c]
        mc = fc.mean(axis=0)
        between += fc.shape[0] * (mc - mu) ** 2
        within += fc.shape[0] * fc.var(axis=0)
    scores = np.zeros(f.shape[1])
    pos = within > 0
    scores[pos] = between[pos] / within[pos]
    scores[~pos & (between > 0)] = FISHER_SENTINEL
    return scores


def _root_projection(arr: np.ndarray, factors) -> tuple:
    """Scale-0 scores and residual of a samples-last tensor."""
    scores = arr
    for n, u in enumerate(factors):
        scores = mode_dot_array(scores, u.T, n)
    approx = scores
    for n, u in enumerate(factors):
        approx = mode_dot_array(approx, u, n)
    return scores, arr - approx


def _raw_features(arr: np.ndarray, root_factors, partition: PartitionSpec, block_factors) -> np.ndarray:
    m = arr.shape[-1]
    s0, w0 = _root_projection(arr, root_factors)
    cols = [unfold_array(s0, arr.ndim - 1)]
    for k, vs in enumerate(block_factors):
        index = partition.index_sets(k)
        block = w0[np.ix_(*index, np.arange(m))]
        for n, v in enumerate(vs):
            block = mode_dot_array(block, v.T, n)
        cols.append(unfold_array(block, arr.ndim - 1))
    return np.hstack(cols)


def fit_features(
    train: TensorLike,
    labels,
    clusters: Sequence[int],
    n_features: int,
    tau: Optional[float] = None,
    ranks: Optional[Sequence[int]] = None,
    partitioner: Partitioner = KMeans(),
) -> tuple:
    """Learn projections on ``train`` (samples last) and pick the top features.

    ``clusters`` and ``ranks`` cover the non-sample modes only.  Exactly one
    of ``tau`` and ``ranks`` sets the scale-0 truncation; scale-1 blocks keep
    every singular vector.

    Returns
    -------
    model : FeatureModel
    features : ndarray
        Selected training features, one row per sample.
    """
    arr = as_tensor(train).array
    if arr.ndim < 2:
        raise ValueError("training tensor needs at least one mode besides the sample mode")
    n_modes = arr.ndim - 1
    y = _check_labels(labels, arr.shape[-1])
    if (tau is None) == (ranks is None):
        raise ValueError("give exactly one of tau or ranks")
    if len(clusters) != n_modes:
        raise ValueError(f"expected {n_modes} cluster counts (sample mode excluded)")
    if ranks is not None and len(ranks) != n_modes:
        raise ValueError(f"expected {n_modes} ranks (sample mode excluded)")
    if n_features < 1:
        raise ValueError("n_features must be >= 1")

    root = []
    for n in range(n_modes):
        s = svd(unfold_array(arr, n))
        if ranks is not None:
            if not 1 <= ranks[n] <= arr.shape[n]:
                raise ValueError(f"rank {ranks[n]} for mode {n} outside [1, {arr.shape[n]}]")
            r = min(ranks[n], s.left_vectors.shape[1])
        elif s.singular_values[0] == 0.0:
            r = 1
        else:
            r = rank_by_energy(s.singular_values, tau)
        root.append(s.left_vectors[:, :r].copy())

    _, w0 = _root_projection(arr, root)
    spec = make_partition(w0, (*clusters, 1), partitioner)
    blocks = []
    for k in range(spec.n_subtensors):
        index = spec.index_sets(k)
        block = w0[np.ix_(*index)]
        blocks.append(tuple(svd(unfold_array(block, n)).left_vectors for n in range(n_modes)))
    # store the partition over the non-sample modes only
    spec = PartitionSpec(spec.labels[:n_modes])

    raw = _raw_features(arr, root, spec, blocks)
    scores = fisher_score(raw, y)
    if n_features > raw.shape[1]:
        warnings.warn(f"n_features={n_features} exceeds {raw.shape[1]} available; using all")
        n_features = raw.shape[1]
    order = np.argsort(-scores, kind="stable")[:n_features]
    model = FeatureModel(
        arr.shape[:-1], tuple(root), spec, tuple(blocks), order, scores, partitioner
    )
    return model, raw[:, order]


def transform(model: FeatureModel, test: TensorLike) -> np.ndarray:
    """Selected features of ``test`` (samples last) under the training projections."""
    arr = as_tensor(test).array
    if arr.shape[:-1] != model.sample_shape or arr.ndim != len(model.sample_shape) + 1:
        raise ValueError(
            f"test tensor shape {arr.shape} does not match training sample shape {model.sample_shape}"
        )
    raw = _raw_features(arr, model.root_factors, model.partition, model.block_factors)
    return raw[:, model.selected]


def _check_train(train, labels, test):
    xtr = np.asarray(train, dtype=np.float64)
    xte = np.asarray(test, dtype=np.float64)
    y = np.asarray(labels)
    if xtr.ndim != 2 or xtr.shape[0] == 0:
        raise ValueError("training set is empty")
    if y.shape != (xtr.shape[0],):
        raise ValueError("one label per training row is required")
    if xte.ndim != 2 or xte.shape[1] != xtr.shape[1]:
        raise ValueError("test features must have the training feature count")
    return xtr, y, xte


def knn1_classify(train, labels, test) -> np.ndarray:
    """Nearest training row by Euclidean distance; ties go to the lowest index."""
    xtr, y, xte = _check_train(train, labels, test)
    d2 = np.sum((xte[:, None, :] - xtr[None, :, :]) ** 2, axis=2)
    return y[np.argmin(d2, axis=1)]


def naive_bayes_classify(train, labels, test) -> np.ndarray:
    """Gaussian naive Bayes with class-frequency priors and a variance floor."""
    xtr, y, xte = _check_train(train, labels, test)
    classes = np.unique(y)
    logp = np.empty((xte.shape[0], classes.size))
    for j, c in enumerate(classes):
        xc = xtr[y == c]
        mu = xc.mean(axis=0)
        var = np.maximum(xc.var(axis=0), VARIANCE_FLOOR)
        logp[:, j] = (
            np.log(xc.shape[0] / xtr.shape[0])
            - 0.5 * np.sum(np.log(2 * np.pi * var))
            - 0.5 * np.sum((xte - mu) ** 2 / var, axis=1)
        )
    return classes[np.argmax(logp, axis=1)]
