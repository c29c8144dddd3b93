"""Multiscale HoSVD trees: construction, reconstruction and greedy pruning."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .hosvd import TuckerFactors, hosvd_truncated, reconstruct
from .partition import (
    GroundTruth,
    KMeans,
    Partitioner,
    PartitionSpec,
    RandomPartitioner,
    make_partition,
)
from .tensor import DenseTensor, TensorLike, as_tensor

__all__ = [
    "TreeConfig",
    "MsNode",
    "MsTree",
    "CostReport",
    "MemoryCostReport",
    "build",
    "reconstruct_tree",
    "prune",
    "prune_sweep",
    "cost_report",
    "memory_cost_bound_check",
    "partitioner_to_dict",
    "partitioner_from_dict",
]


@dataclass(frozen=True)
class TreeConfig:
    """Parameters of an MS-HoSVD decomposition.

    ``ranks`` lists one rank tuple per scale (the last entry is reused for
    deeper scales); otherwise ``tau`` selects ranks by energy at every node.
    Requested ranks and cluster counts are clamped to a node's mode lengths.
    """

    clusters: tuple
    max_scale: int = 1
    tau: Optional[float] = None
    ranks: Optional[tuple] = None
    partitioner: Partitioner = field(default_factory=KMeans)

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(int(c) for c in self.clusters))
        if self.ranks is not None:
            object.__setattr__(
                self, "ranks", tuple(tuple(int(r) for r in rk) for rk in self.ranks)
            )
        self.validate()

    def validate(self, shape: Optional[Sequence[int]] = None):
        if self.max_scale < 0:
            raise ValueError("max_scale must be >= 0")
        if any(c < 1 for c in self.clusters):
            raise ValueError("cluster counts must be >= 1")
        if (self.tau is None) == (self.ranks is None):
            raise ValueError("give exactly one of tau or ranks")
        if self.tau is not None and not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.ranks is not None:
            if len(self.ranks) == 0:
                raise ValueError("ranks must contain at least one tuple")
            for rk in self.ranks:
                if len(rk) != len(self.clusters) or any(r < 1 for r in rk):
                    raise ValueError(f"invalid rank tuple {rk}")
        if shape is not None:
            if len(shape) != len(self.clusters):
                raise ValueError(
                    f"{len(self.clusters)} cluster counts given for a {len(shape)}-mode tensor"
                )
            if isinstance(self.partitioner, GroundTruth):
                if len(self.partitioner.labels) != len(shape) or any(
                    len(lab) != n for lab, n in zip(self.partitioner.labels, shape)
                ):
                    raise ValueError("ground-truth labels do not match the tensor shape")

    @property
    def n_children(self) -> int:
        return int(np.prod(self.clusters))

    def ranks_at(self, scale: int, shape: Sequence[int]):
        if self.ranks is None:
            return None
        rk = self.ranks[min(scale, len(self.ranks) - 1)]
        return tuple(min(r, n) for r, n in zip(rk, shape))

    def to_dict(self) -> dict:
        return {
            "clusters": list(self.clusters),
            "max_scale": self.max_scale,
            "tau": self.tau,
            "ranks": None if self.ranks is None else [list(r) for r in self.ranks],
            "partitioner": partitioner_to_dict(self.partitioner),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeConfig":
        return cls(
            clusters=tuple(d["clusters"]),
            max_scale=int(d["max_scale"]),
            tau=d.get("tau"),
            ranks=None if d.get("ranks") is None else tuple(tuple(r) for r in d["ranks"]),
            partitioner=partitioner_from_dict(d["partitioner"]),
        )


def partitioner_to_dict(p: Partitioner) -> dict:
    if isinstance(p, KMeans):
        return {
            "kind": "kmeans",
            "seed": p.seed,
            "max_iters": p.max_iters,
            "reseeds": p.reseeds,
            "features": p.features,
        }
    if isinstance(p, RandomPartitioner):
        return {"kind": "random", "seed": p.seed}
    if isinstance(p, GroundTruth):
        return {"kind": "ground-truth", "labels": [np.asarray(lab).tolist() for lab in p.labels]}
    raise TypeError(f"unknown partitioner {p!r}")


def partitioner_from_dict(d: dict) -> Partitioner:
    kind = d["kind"]
    if kind == "kmeans":
        return KMeans(
            int(d["seed"]),
            int(d.get("max_iters", 100)),
            int(d.get("reseeds", 5)),
            d.get("features", "affinity"),
        )
    if kind == "random":
        return RandomPartitioner(int(d["seed"]))
    if kind == "ground-truth":
        return GroundTruth(tuple(np.asarray(lab, dtype=np.int64) for lab in d["labels"]))
    raise ValueError(f"unknown partitioner kind {kind!r}")


@dataclass(eq=False)
class MsNode:
    """One subtensor approximation: scale, id within the scale, and root coordinates."""

    scale: int
    id: int
    index_map: tuple
    factors: TuckerFactors
    partition: Optional[PartitionSpec] = None
    children: list = field(default_factory=list)
    subtensor: Optional[DenseTensor] = None

    def approximation(self) -> np.ndarray:
        return reconstruct(self.factors).array


@dataclass(eq=False)
class MsTree:
    root: MsNode
    config: TreeConfig
    shape: tuple
    objective_history: list = field(default_factory=list)

    def nodes(self) -> list:
        """All nodes ordered by scale, then id."""
        out, queue = [], deque([self.root])
        while queue:
            node = queue.popleft()
            out.append(node)
            queue.extend(node.children)
        out.sort(key=lambda nd: (nd.scale, nd.id))
        return out

    @property
    def depth(self) -> int:
        return max(nd.scale for nd in self.nodes())


@dataclass(frozen=True)
class CostReport:
    normalized_error: float
    stored_elements: int
    compression_rate: float
    objective_H: float
    lam: float

    def to_dict(self) -> dict:
        return {
            "normalized_error": self.normalized_error,
            "stored_elements": self.stored_elements,
            "compression_rate": self.compression_rate,
            "objective_H": self.objective_H,
            "lambda": self.lam,
        }


def _node_factors(data: np.ndarray, config: TreeConfig, scale: int) -> TuckerFactors:
    ranks = config.ranks_at(scale, data.shape)
    if ranks is None:
        return hosvd_truncated(data, tau=config.tau)
    return hosvd_truncated(data, ranks=ranks)


def _node_strategy(config: TreeConfig, index_map) -> Partitioner:
    p = config.partitioner
    if isinstance(p, GroundTruth):
        return GroundTruth(tuple(np.asarray(lab)[idx] for lab, idx in zip(p.labels, index_map)))
    return p


def _spawn_children(residual: np.ndarray, parent_map, scale: int, node_id: int, config: TreeConfig):
    """Partition a node residual; yields (partition, [(child_id, child_map, block)])."""
    clusters = [min(c, n) for c, n in zip(config.clusters, residual.shape)]
    spec = make_partition(
        residual, clusters, _node_strategy(config, parent_map), stream=(scale, node_id)
    )
    kids = []
    for k in range(spec.n_subtensors):
        local = spec.index_sets(k)
        child_map = tuple(pm[ix] for pm, ix in zip(parent_map, local))
        kids.append((config.n_children * node_id + k, child_map, residual[np.ix_(*local)]))
    return spec, kids


def build(t: TensorLike, config: TreeConfig, keep_subtensors: bool = False) -> MsTree:
    """Full MS-HoSVD tree down to ``config.max_scale``.

    Nodes are processed first-in first-out: scale by scale, and by id within
    a scale.  Child ``k`` of node ``t`` receives id ``K*t + k`` where ``K``
    is the product of the configured cluster counts.
    """
    x = as_tensor(t)
    config.validate(x.shape)
    root_map = tuple(np.arange(n) for n in x.shape)
    queue = deque([(0, 0, root_map, x.array, None)])
    root = None
    while queue:
        scale, node_id, index_map, data, parent = queue.popleft()
        factors = _node_factors(data, config, scale)
        node = MsNode(scale, node_id, index_map, factors)
        if keep_subtensors:
            node.subtensor = DenseTensor(data)
        if parent is None:
            root = node
        else:
            parent.children.append(node)
        if scale < config.max_scale:
            residual = data - node.approximation()
            node.partition, kids = _spawn_children(residual, index_map, scale, node_id, config)
            for child_id, child_map, block in kids:
                queue.append((scale + 1, child_id, child_map, block, node))
    return MsTree(root, config, x.shape)


def reconstruct_tree(tree: MsTree, up_to_scale: Optional[int] = None) -> DenseTensor:
    """Sum of the node approximations with scale <= ``up_to_scale``, embedded in place."""
    if up_to_scale is None:
        up_to_scale = tree.config.max_scale
    if not 0 <= up_to_scale <= tree.config.max_scale:
        raise ValueError(f"scale must lie in [0, {tree.config.max_scale}], got {up_to_scale}")
    out = np.zeros(tree.shape, order="F")
    for node in tree.nodes():
        if node.scale <= up_to_scale:
            out[np.ix_(*node.index_map)] += node.approximation()
    return DenseTensor(out)


def _stored(tree: MsTree) -> int:
    return sum(nd.factors.stored_elements() for nd in tree.nodes())


def cost_report(tree: MsTree, original: TensorLike, lam: float = 0.0) -> CostReport:
    """Normalized error, stored-element count and ``error + lam * compression``.

    Compression counts stored floats relative to the original tensor size,
    which equals the bit ratio when every value uses the same precision.
    """
    x = as_tensor(original).array
    approx = reconstruct_tree(tree).array
    xn = float(np.sqrt(np.sum(x * x)))
    diff = x - approx
    err = float(np.sqrt(np.sum(diff * diff))) / xn if xn > 0 else 0.0
    stored = _stored(tree)
    rate = stored / x.size
    return CostReport(err, stored, rate, err + lam * rate, float(lam))


def prune(
    t: TensorLike,
    config: TreeConfig,
    lam: float,
    min_decrease: float = 1e-9,
    full_tree: Optional[MsTree] = None,
) -> tuple:
    """Greedy adaptive pruning minimizing ``H = error + lam * compression``.

    The root is always kept.  Each step accepts the listed candidate whose
    addition lowers the global objective the most, then lists that node's
    children (if its scale is below ``config.max_scale``).  The loop stops
    when no candidate lowers ``H`` by more than ``min_decrease``.  Ties go to
    the lower scale, then the lower id.

    Candidates never depend on ``lam``: a node's children come from its own
    residual.  Passing the result of ``build(t, config)`` as ``full_tree``
    therefore reuses its decompositions, which makes a sweep over several
    weights much cheaper.

    Returns
    -------
    tree : MsTree
        Accepted nodes only; ``tree.objective_history`` holds ``H`` after
        each accepted node.
    report : CostReport
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    x = as_tensor(t)
    config.validate(x.shape)
    if full_tree is None:
        full_tree = build(x, config)
    elif full_tree.shape != x.shape or full_tree.config.to_dict() != config.to_dict():
        raise ValueError("full_tree was built for a different tensor shape or configuration")
    arr = x.array
    total = arr.size
    xn = float(np.sqrt(np.sum(arr * arr)))
    inv = 1.0 / xn if xn > 0 else 0.0

    def copy(node: MsNode) -> MsNode:
        return MsNode(node.scale, node.id, node.index_map, node.factors, node.partition)

    src_root = full_tree.root
    root = copy(src_root)
    resid = arr - src_root.approximation()
    r2 = float(np.sum(resid * resid))
    stored = root.factors.stored_elements()
    err = np.sqrt(r2) * inv
    history = [err + lam * stored / total]

    # (source node, accepted parent copy, approximation, stored count)
    candidates = [
        (c, root, c.approximation(), c.factors.stored_elements()) for c in src_root.children
    ]
    while candidates:
        best, best_key = None, None
        for i, (cand, _, approx, cost) in enumerate(candidates):
            rb = resid[np.ix_(*cand.index_map)]
            d = rb - approx
            new_r2 = max(r2 - float(np.sum(rb * rb)) + float(np.sum(d * d)), 0.0)
            delta = np.sqrt(new_r2) * inv - err + lam * cost / total
            key = (delta, cand.scale, cand.id)
            if best_key is None or key < best_key:
                best, best_key = i, key
        if not best_key[0] < -min_decrease:
            break
        cand, parent, approx, cost = candidates.pop(best)
        resid[np.ix_(*cand.index_map)] -= approx
        r2 = float(np.sum(resid * resid))
        err = np.sqrt(r2) * inv
        stored += cost
        node = copy(cand)
        parent.children.append(node)
        parent.children.sort(key=lambda nd: nd.id)
        history.append(err + lam * stored / total)
        candidates.extend(
            (c, node, c.approximation(), c.factors.stored_elements()) for c in cand.children
        )

    tree = MsTree(root, config, x.shape, history)
    return tree, cost_report(tree, x, lam)


def prune_sweep(t: TensorLike, config: TreeConfig, lams: Sequence[float], min_decrease: float = 1e-9):
    """``prune`` for every weight in ``lams``, sharing one full decomposition."""
    full = build(t, config)
    return [prune(t, config, lam, min_decrease, full_tree=full) for lam in lams]


@dataclass(frozen=True)
class MemoryCostReport:
    """Approximate storage of scale 0 (``f0``) and scale 1 (``f1``) for uniform sizes."""

    order: int
    mode_length: int
    clusters: int
    rank0: int
    rank1: int
    f0: Fraction
    f1: Fraction
    rank_condition: bool
    f1_below_f0: bool

    def to_dict(self) -> dict:
        return {
            "N": self.order,
            "I": self.mode_length,
            "c": self.clusters,
            "r0": self.rank0,
            "r1": self.rank1,
            "F0": str(self.f0),
            "F1": str(self.f1),
            "r1_le_r0_over_c_pow": self.rank_condition,
            "F1_lt_F0": self.f1_below_f0,
        }


def memory_cost_bound_check(order: int, mode_length: int, clusters: int, rank0: int, rank1: int):
    """Compare ``r0^N + N I r0`` against ``c^N (r1^N + N I r1 / c)`` exactly."""
    n, i, c = order, mode_length, clusters
    f0 = Fraction(rank0**n + n * i * rank0)
    f1 = Fraction(c**n) * (Fraction(rank1**n) + Fraction(n * i * rank1, c))
    cond = Fraction(rank1) <= Fraction(rank0, c ** (n - 1))
    return MemoryCostReport(n, i, c, rank0, rank1, f0, f1, cond, f1 < f0)
