"""Per-mode clustering of a tensor's unfolding rows into disjoint subtensors."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .tensor import DenseTensor, TensorLike, as_tensor, unfold_array

__all__ = [
    "PartitionSpec",
    "KMeans",
    "RandomPartitioner",
    "GroundTruth",
    "Partitioner",
    "EmptyClusterError",
    "make_partition",
    "kmeans_labels",
    "extract_subtensor",
    "embed_subtensor",
]

log = logging.getLogger(__name__)


class EmptyClusterError(RuntimeError):
    pass


def _canonical(labels: np.ndarray) -> np.ndarray:
    """Relabel clusters 0, 1, ... in order of first appearance."""
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(order.size, dtype=np.int64)
    remap[order] = np.arange(order.size)
    return remap[np.unique(labels, return_inverse=True)[1]]


@dataclass(frozen=True)
class PartitionSpec:
    """Cluster labels for every index of every mode.

    Subtensor ``k`` takes cluster ``k_n`` along mode ``n``, with the
    cluster index of mode 0 varying fastest in ``k``.
    """

    labels: tuple

    def __post_init__(self):
        fixed = []
        for n, lab in enumerate(self.labels):
            lab = np.asarray(lab)
            if lab.ndim != 1 or lab.size == 0:
                raise ValueError(f"labels for mode {n} must be a non-empty vector")
            if not np.issubdtype(lab.dtype, np.integer):
                if not np.all(lab == np.round(lab)):
                    raise ValueError(f"labels for mode {n} must be integers")
            lab = _canonical(lab.astype(np.int64))
            lab.flags.writeable = False
            fixed.append(lab)
        object.__setattr__(self, "labels", tuple(fixed))

    @property
    def shape(self) -> tuple:
        return tuple(lab.size for lab in self.labels)

    @property
    def clusters_per_mode(self) -> tuple:
        return tuple(int(lab.max()) + 1 for lab in self.labels)

    @property
    def n_subtensors(self) -> int:
        return int(np.prod(self.clusters_per_mode))

    def cluster_ids(self, k: int) -> tuple:
        if not 0 <= k < self.n_subtensors:
            raise ValueError(f"subtensor id must be in [0, {self.n_subtensors}), got {k}")
        return tuple(int(i) for i in np.unravel_index(k, self.clusters_per_mode, order="F"))

    def index_sets(self, k: int) -> tuple:
        """Sorted parent indices of subtensor ``k`` along every mode."""
        return tuple(
            np.flatnonzero(lab == c) for lab, c in zip(self.labels, self.cluster_ids(k))
        )

    def to_json(self) -> str:
        return json.dumps({"labels": [lab.tolist() for lab in self.labels]})

    @classmethod
    def from_json(cls, text: str) -> "PartitionSpec":
        return cls(tuple(np.asarray(lab, dtype=np.int64) for lab in json.loads(text)["labels"]))


@dataclass(frozen=True)
class KMeans:
    """Lloyd's k-means over the unfolding rows, k-means++ seeded.

    ``features="rows"`` clusters the l2-normalized rows directly.  The
    default ``"affinity"`` clusters each row's vector of absolute cosines
    to all rows, which groups rows lying in a common subspace even when
    their centroids coincide.
    """

    seed: int = 0
    max_iters: int = 100
    reseeds: int = 5
    features: str = "affinity"

    def __post_init__(self):
        if self.features not in ("rows", "affinity"):
            raise ValueError(f"unknown k-means features {self.features!r}")


@dataclass(frozen=True)
class RandomPartitioner:
    """Random balanced split of each mode's indices."""

    seed: int = 0


@dataclass(frozen=True)
class GroundTruth:
    """Explicit per-mode labels, e.g. the planted blocks of a synthetic tensor."""

    labels: tuple


Partitioner = Union[KMeans, RandomPartitioner, GroundTruth]


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iters: int) -> np.ndarray:
    labels = None
    sq = np.sum(x * x, axis=1)[:, None]
    for _ in range(max_iters):
        d2 = sq - 2.0 * x @ centers.T + np.sum(centers * centers, axis=1)[None, :]
        new = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
    return labels


def _split_largest(x: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    labels = labels.copy()
    for j in range(k):
        if np.any(labels == j):
            continue
        counts = np.bincount(labels, minlength=k)
        big = int(np.argmax(counts))
        members = np.flatnonzero(labels == big)
        centroid = x[members].mean(axis=0)
        far = members[np.argsort(-np.sum((x[members] - centroid) ** 2, axis=1), kind="stable")]
        labels[far[: len(far) // 2]] = j
    return labels


def kmeans_labels(rows, k: int, rng: np.random.Generator, max_iters: int = 100, reseeds: int = 5):
    """Cluster the l2-normalized rows of ``rows`` into ``k`` non-empty groups.

    An empty cluster triggers a fresh k-means++ seeding; after ``reseeds``
    retries the largest cluster is split instead.
    """
    x = np.asarray(rows, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"cannot form {k} clusters from {n} rows")
    norms = np.sqrt(np.sum(x * x, axis=1))
    x = x / np.where(norms > 0, norms, 1.0)[:, None]
    if k == 1:
        return np.zeros(n, dtype=np.int64)
    labels = None
    for _ in range(reseeds + 1):
        labels = _lloyd(x, _kmeans_pp(x, k, rng), max_iters)
        if np.unique(labels).size == k:
            return labels
    log.debug("k-means left an empty cluster after %d seedings; splitting", reseeds + 1)
    labels = _split_largest(x, labels, k)
    if np.unique(labels).size != k:
        raise EmptyClusterError(f"could not form {k} non-empty clusters")
    return labels


def _affinity_features(rows: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.sum(rows * rows, axis=1))
    x = rows / np.where(norms > 0, norms, 1.0)[:, None]
    return np.abs(x @ x.T)


def _random_labels(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.empty(n, dtype=np.int64)
    labels[rng.permutation(n)] = np.arange(n) % k
    return labels


def make_partition(
    t: TensorLike,
    clusters_per_mode: Sequence[int],
    strategy: Partitioner,
    stream: Sequence[int] = (),
) -> PartitionSpec:
    """Partition every mode of ``t`` into the requested number of clusters.

    ``stream`` extends the strategy seed so that different tree nodes draw
    independent yet reproducible random numbers.
    """
    arr = as_tensor(t).array
    c = [int(x) for x in clusters_per_mode]
    if len(c) != arr.ndim:
        raise ValueError(f"expected {arr.ndim} cluster counts, got {len(c)}")
    for n, (cn, i_n) in enumerate(zip(c, arr.shape)):
        if not 1 <= cn <= i_n:
            raise ValueError(f"cluster count {cn} for mode {n} outside [1, {i_n}]")

    if isinstance(strategy, GroundTruth):
        if len(strategy.labels) != arr.ndim:
            raise ValueError("ground-truth labels must cover every mode")
        labels = []
        for n, lab in enumerate(strategy.labels):
            lab = np.asarray(lab)
            if lab.size != arr.shape[n]:
                raise ValueError(f"ground-truth labels for mode {n} have the wrong length")
            labels.append(lab if c[n] > 1 else np.zeros(arr.shape[n], dtype=np.int64))
        return PartitionSpec(tuple(labels))

    labels = []
    for n in range(arr.ndim):
        rng = np.random.default_rng([strategy.seed, *stream, n])
        if c[n] == 1:
            labels.append(np.zeros(arr.shape[n], dtype=np.int64))
        elif isinstance(strategy, RandomPartitioner):
            labels.append(_random_labels(arr.shape[n], c[n], rng))
        elif isinstance(strategy, KMeans):
            rows = unfold_array(arr, n)
            if strategy.features == "affinity":
                rows = _affinity_features(rows)
            labels.append(kmeans_labels(rows, c[n], rng, strategy.max_iters, strategy.reseeds))
        else:
            raise TypeError(f"unknown partitioner {strategy!r}")
    return PartitionSpec(tuple(labels))


def extract_subtensor(t: TensorLike, spec: PartitionSpec, k: int):
    """Compact block ``k`` of ``t`` and its per-mode parent indices."""
    arr = as_tensor(t).array
    if spec.shape != arr.shape:
        raise ValueError(f"partition shape {spec.shape} does not match tensor {arr.shape}")
    index = spec.index_sets(k)
    return DenseTensor(arr[np.ix_(*index)]), index


def embed_subtensor(sub: TensorLike, index, parent_shape: Sequence[int]) -> DenseTensor:
    """Place ``sub`` at ``index`` inside a zero tensor of ``parent_shape``."""
    sub = as_tensor(sub)
    parent_shape = tuple(parent_shape)
    if len(index) != len(parent_shape) or len(index) != sub.ndim:
        raise ValueError("index map must have one entry per mode")
    for n, (idx, i_n) in enumerate(zip(index, parent_shape)):
        idx = np.asarray(idx)
        if idx.size != sub.shape[n]:
            raise ValueError(f"index map for mode {n} has {idx.size} entries, block has {sub.shape[n]}")
        if idx.size and (idx.min() < 0 or idx.max() >= i_n):
            raise ValueError(f"index map for mode {n} out of range [0, {i_n})")
    out = np.zeros(parent_shape, order="F")
    out[np.ix_(*index)] = sub.array
    return DenseTensor(out)
