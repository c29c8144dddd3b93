"""Error-bound verifiers, the block-structured synthetic benchmark, and cost accounting."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .hosvd import hosvd_truncated, reconstruct
from .linalg import orthonormalize, svd
from .partition import GroundTruth, KMeans, PartitionSpec, RandomPartitioner, make_partition
from .tensor import DenseTensor, TensorLike, as_tensor, mode_dot_array, unfold_array
from .tree import TreeConfig, build, cost_report, reconstruct_tree

__all__ = [
    "EffectivePartitionReport",
    "BoundReport",
    "check_effective_partition",
    "theorem1_check",
    "generate_synthetic",
    "Table4",
    "run_table4",
    "run_table5",
    "complexity_estimate",
    "TABLE4_REFERENCE",
    "TABLE5_REFERENCE",
]

# (method, first-scale rank or HoSVD rank) -> (mean, std) over 20 trials
TABLE4_REFERENCE = {
    ("ground-truth", 2): (0.2502, 0.0263),
    ("ground-truth", 4): (0.0304, 0.0077),
    ("clustering", 2): (0.3587, 0.0583),
    ("clustering", 4): (0.1099, 0.0391),
    ("clustering", 6): (0.0254, 0.0152),
    ("random", 2): (0.6095, 0.0398),
    ("random", 4): (0.3588, 0.0298),
    ("random", 6): (0.1855, 0.0251),
    ("hosvd", 4): (0.5457, 0.0449),
    ("hosvd", 8): (0.2127, 0.0195),
    ("hosvd", 12): (0.0733, 0.0129),
}

TABLE5_REFERENCE = {
    ("lhs", "ground-truth"): (0.2618, 0.0236),
    ("lhs", "clustering"): (0.3469, 0.0513),
    ("rhs", 4): (2.9928, 0.5081),
    ("rhs", 6): (1.1835, 0.3010),
    ("rhs", 8): (0.4228, 0.0978),
}


def _sq(a: np.ndarray) -> float:
    return float(np.sum(a * a))


def _complement_sq(arr: np.ndarray, mode: int, u: np.ndarray) -> float:
    """||arr x_mode (I - u u^T)||^2."""
    m = unfold_array(arr, mode)
    return _sq(m - u @ (u.T @ m))


@dataclass(frozen=True)
class EffectivePartitionReport:
    holds: bool
    lhs: tuple
    rhs: tuple
    bijection: tuple
    per_block: tuple


def check_effective_partition(
    w0: TensorLike,
    effective: PartitionSpec,
    ranks1: Sequence[int],
    pessimistic: PartitionSpec,
    rank_h: int,
) -> EffectivePartitionReport:
    """Test whether ``effective`` is an effective partition of the residual ``w0``.

    Block ``k``'s own truncation error (ranks ``ranks1``, summed over modes)
    is compared against the error that a rank-``rank_h`` HoSVD of the whole
    residual leaves on pessimistic block ``f(k)``.  The matching ``f`` pairs
    the errors of both sides after sorting each in decreasing order.
    """
    arr = as_tensor(w0).array
    if effective.shape != arr.shape or pessimistic.shape != arr.shape:
        raise ValueError("partitions must match the residual's shape")
    if effective.n_subtensors != pessimistic.n_subtensors:
        raise ValueError("both partitions must have the same number of blocks")
    if any(rank_h > n for n in arr.shape):
        raise ValueError(f"rank_h={rank_h} exceeds a mode length of {arr.shape}")
    bases = [svd(unfold_array(arr, n)).left_vectors for n in range(arr.ndim)]
    return _effective_partition(arr, effective, ranks1, pessimistic, rank_h, bases)


def _effective_partition(arr, effective, ranks1, pessimistic, rank_h, bases):
    n_modes = arr.ndim
    p_tilde = [u[:, :rank_h] for u in bases]

    lhs = []
    for k in range(effective.n_subtensors):
        block = arr[np.ix_(*effective.index_sets(k))]
        ranks = [min(r, i) for r, i in zip(ranks1, block.shape)]
        f = hosvd_truncated(block, ranks=ranks)
        lhs.append(sum(_complement_sq(block, n, u) for n, u in enumerate(f.factors)))

    rhs = []
    for j in range(pessimistic.n_subtensors):
        index = pessimistic.index_sets(j)
        total = 0.0
        for n in range(n_modes):
            sel = list(index)
            sel[n] = np.arange(arr.shape[n])
            part = arr[np.ix_(*sel)]
            m = unfold_array(part, n)
            m = m - p_tilde[n] @ (p_tilde[n].T @ m)
            total += _sq(m[index[n], :])
        rhs.append(total)

    lhs_order = np.argsort(-np.asarray(lhs), kind="stable")
    rhs_order = np.argsort(-np.asarray(rhs), kind="stable")
    f = np.empty(len(lhs), dtype=np.int64)
    f[lhs_order] = rhs_order
    per_block = tuple(bool(lhs[k] <= rhs[f[k]]) for k in range(len(lhs)))
    return EffectivePartitionReport(
        all(per_block), tuple(lhs), tuple(rhs), tuple(int(x) for x in f), per_block
    )


@dataclass(frozen=True)
class BoundReport:
    """First-scale error against the high-rank HoSVD error bound.

    ``lhs`` is ``||X - X0_hat - X1_hat||^2`` and ``rhs`` is
    ``sum_n ||X x_n (I - Pbar_n)||^2``; both are absolute squared values.
    """

    lhs: float
    rhs: float
    lhs_normalized: float
    rhs_normalized: float
    bound_holds: bool
    condition_holds: bool
    condition: EffectivePartitionReport
    bijection_used: tuple
    intermediate_lhs: float
    intermediate_rhs: float


def theorem1_check(
    x: TensorLike,
    r0: Sequence[int],
    r1: Sequence[int],
    partition: PartitionSpec,
    rank_h: int,
    pessimistic: Optional[PartitionSpec] = None,
    seed: int = 0,
) -> BoundReport:
    """Run a one-scale MS-HoSVD on a fixed partition and evaluate the bound.

    When ``pessimistic`` is omitted, a random balanced partition of the
    residual with the same cluster counts (seeded by ``seed``) is used.
    """
    return _theorem1_reports(x, r0, r1, partition, (rank_h,), pessimistic, seed)[0]


def _theorem1_reports(x, r0, r1, partition, rank_hs, pessimistic=None, seed=0):
    x = as_tensor(x)
    arr = x.array
    if any(rh > n or rh < 1 for rh in rank_hs for n in arr.shape):
        raise ValueError(f"rank_h values {rank_hs} must lie in [1, min{arr.shape}]")
    xn2 = _sq(arr)
    config = TreeConfig(
        clusters=partition.clusters_per_mode,
        max_scale=1,
        ranks=(tuple(r0), tuple(r1)),
        partitioner=GroundTruth(partition.labels),
    )
    tree = build(x, config)
    w0 = arr - reconstruct(tree.root.factors).array
    lhs = _sq(arr - reconstruct_tree(tree).array)
    if pessimistic is None:
        pessimistic = make_partition(w0, partition.clusters_per_mode, RandomPartitioner(seed))

    x_bases = [svd(unfold_array(arr, n)).left_vectors for n in range(arr.ndim)]
    w_bases = [svd(unfold_array(w0, n)).left_vectors for n in range(arr.ndim)]
    scale = np.sqrt(xn2) if xn2 > 0 else 1.0
    reports = []
    for rh in rank_hs:
        rhs = sum(_complement_sq(arr, n, u[:, :rh]) for n, u in enumerate(x_bases))
        cond = _effective_partition(w0, partition, r1, pessimistic, rh, w_bases)
        intermediate_rhs = sum(_complement_sq(w0, n, u[:, :rh]) for n, u in enumerate(w_bases))
        reports.append(
            BoundReport(
                lhs=lhs,
                rhs=rhs,
                lhs_normalized=float(np.sqrt(lhs) / scale),
                rhs_normalized=float(np.sqrt(rhs) / scale),
                bound_holds=lhs <= rhs,
                condition_holds=cond.holds,
                condition=cond,
                bijection_used=cond.bijection,
                intermediate_lhs=lhs,
                intermediate_rhs=intermediate_rhs,
            )
        )
    return reports


def _random_tucker(rng: np.random.Generator, shape, ranks) -> np.ndarray:
    arr = rng.standard_normal(tuple(ranks))
    for n, (i, r) in enumerate(zip(shape, ranks)):
        arr = mode_dot_array(arr, orthonormalize(rng.standard_normal((i, r))), n)
    return arr


def generate_synthetic(
    seed: int,
    shape: Sequence[int] = (20, 20, 20),
    block_shape: Sequence[int] = (10, 10, 10),
    core_rank: Sequence[int] = (2, 2, 2),
    return_parts: bool = False,
):
    """Global low-rank tensor plus independent low-rank blocks.

    Both parts use Gaussian cores and orthonormalized Gaussian factors, are
    scaled to equal Frobenius norm, and the sum is normalized to unit norm.

    Returns
    -------
    x : DenseTensor
    truth : PartitionSpec
        Consecutive ``block_shape`` slabs along every mode.
    global_part, block_part : ndarray
        Only with ``return_parts``: the two summands as scaled inside ``x``.
    """
    shape, block_shape = tuple(shape), tuple(block_shape)
    if len(shape) != len(block_shape) or any(s % b for s, b in zip(shape, block_shape)):
        raise ValueError(f"block shape {block_shape} must divide shape {shape}")
    rng = np.random.default_rng(seed)
    x0 = _random_tucker(rng, shape, core_rank)
    x1 = np.zeros(shape, order="F")
    grid = tuple(s // b for s, b in zip(shape, block_shape))
    for k in range(int(np.prod(grid))):
        pos = np.unravel_index(k, grid, order="F")
        sl = tuple(slice(p * b, (p + 1) * b) for p, b in zip(pos, block_shape))
        x1[sl] = _random_tucker(rng, block_shape, core_rank)
    x0 /= np.sqrt(_sq(x0))
    x1 /= np.sqrt(_sq(x1))
    total = np.sqrt(_sq(x0 + x1))
    x0 /= total
    x1 /= total
    truth = PartitionSpec(tuple(np.arange(s) // b for s, b in zip(shape, block_shape)))
    if return_parts:
        return DenseTensor(x0 + x1), truth, x0, x1
    return DenseTensor(x0 + x1), truth


def _hosvd_error(arr: np.ndarray, rank: int) -> float:
    f = hosvd_truncated(arr, ranks=(rank,) * arr.ndim)
    return float(np.sqrt(_sq(arr - reconstruct(f).array) / _sq(arr)))


def _uniform_stored(shape, rank: int) -> int:
    return rank ** len(shape) + sum(shape) * rank


def _matched_rank(shape, budget: int) -> int:
    """Largest uniform HoSVD rank whose storage fits in ``budget``."""
    r = 1
    while r < min(shape) and _uniform_stored(shape, r + 1) <= budget:
        r += 1
    return r


@dataclass
class Table4:
    """Per-trial errors keyed by (method, rank), plus comparison with reference values."""

    seeds: tuple
    errors: dict = field(default_factory=dict)
    stored: dict = field(default_factory=dict)

    def summary(self, key) -> tuple:
        v = np.asarray(self.errors[key])
        return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0

    def in_band(self, key) -> Optional[bool]:
        if key not in TABLE4_REFERENCE:
            return None
        mean, _ = self.summary(key)
        pm, ps = TABLE4_REFERENCE[key]
        return bool(pm - 3 * ps <= mean <= pm + 3 * ps)

    def properties(self) -> dict:
        """Ordering and monotonicity checks on the mean errors."""
        m = {k: self.summary(k)[0] for k in self.errors}
        out = {}
        for r in (2, 4, 6):
            out[f"ground-truth<=clustering r1={r}"] = m[("ground-truth", r)] <= m[("clustering", r)]
            out[f"clustering<=random r1={r}"] = m[("clustering", r)] <= m[("random", r)]
        for method, ranks in (
            ("ground-truth", (2, 4, 6)),
            ("clustering", (2, 4, 6)),
            ("random", (2, 4, 6)),
            ("hosvd", (4, 8, 12)),
        ):
            vals = [m[(method, r)] for r in ranks]
            out[f"{method} decreasing in rank"] = all(a > b for a, b in zip(vals, vals[1:]))
        for r in (2, 4, 6):
            matched = m[("hosvd-matched", r)]
            out[f"ground-truth beats matched-budget hosvd r1={r}"] = m[("ground-truth", r)] < matched
            out[f"clustering beats matched-budget hosvd r1={r}"] = m[("clustering", r)] < matched
        return out

    def rows(self) -> list:
        rows = []
        for key in self.errors:
            method, rank = key
            mean, std = self.summary(key)
            pm, ps = TABLE4_REFERENCE.get(key, (None, None))
            band = self.in_band(key)
            rows.append(
                {
                    "method": method,
                    "rank0": "" if method.startswith("hosvd") else 2,
                    "rank": rank,
                    "stored_elements": self.stored[key],
                    "mean": mean,
                    "std": std,
                    "ref_mean": pm,
                    "ref_std": ps,
                    "in_band": "" if band is None else band,
                }
            )
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = [
            "method", "rank0", "rank", "stored_elements",
            "mean", "std", "ref_mean", "ref_std", "in_band",
        ]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def run_table4(trials: int = 20, seeds: Optional[Sequence[int]] = None) -> Table4:
    """One-scale MS-HoSVD (three partitioners) against truncated HoSVD on synthetic data.

    Scale-0 ranks are (2,2,2) and scale-1 ranks (r,r,r) for r in 2, 4, 6.
    HoSVD runs at ranks 4, 8, 12 and, for every first-scale rank, at the
    largest uniform rank whose storage fits the ground-truth tree's budget.
    """
    seeds = tuple(range(trials)) if seeds is None else tuple(seeds)
    table = Table4(seeds)

    def record(key, err, stored):
        table.errors.setdefault(key, []).append(err)
        table.stored.setdefault(key, stored)

    for seed in seeds:
        x, truth = generate_synthetic(seed)
        strategies = (
            ("ground-truth", GroundTruth(truth.labels)),
            ("clustering", KMeans(seed)),
            ("random", RandomPartitioner(seed)),
        )
        budgets = {}
        for name, strategy in strategies:
            for r1 in (2, 4, 6):
                config = TreeConfig(
                    (2, 2, 2), 1, ranks=((2, 2, 2), (r1, r1, r1)), partitioner=strategy
                )
                rep = cost_report(build(x, config), x)
                record((name, r1), rep.normalized_error, rep.stored_elements)
                if name == "ground-truth":
                    budgets[r1] = rep.stored_elements
        for r in (4, 8, 12):
            record(("hosvd", r), _hosvd_error(x.array, r), _uniform_stored(x.shape, r))
        for r1, budget in budgets.items():
            r = _matched_rank(x.shape, budget)
            record(("hosvd-matched", r1), _hosvd_error(x.array, r), _uniform_stored(x.shape, r))
    return table


def run_table5(trials: int = 20, seeds: Optional[Sequence[int]] = None, rank_hs=(4, 6, 8)):
    """First-scale bound magnitudes on synthetic data, r0 = r1 = 2.

    Returns a list of per-trial dicts and the CSV text summarizing them.
    Each trial records, for ground-truth and k-means partitions and every
    ``rank_h``, the bound sides and whether the effective-partition
    condition held against a random pessimistic partition.
    """
    seeds = tuple(range(trials)) if seeds is None else tuple(seeds)
    records = []
    for seed in seeds:
        x, truth = generate_synthetic(seed)
        w0 = x.array - reconstruct(hosvd_truncated(x, ranks=(2, 2, 2))).array
        partitions = (
            ("ground-truth", truth),
            ("clustering", make_partition(w0, (2, 2, 2), KMeans(seed), stream=(0, 0))),
        )
        pessimistic = make_partition(w0, (2, 2, 2), RandomPartitioner(seed))
        for name, spec in partitions:
            reports = _theorem1_reports(x, (2, 2, 2), (2, 2, 2), spec, rank_hs, pessimistic)
            for rh, rep in zip(rank_hs, reports):
                records.append(
                    {
                        "seed": seed,
                        "partition": name,
                        "rank_h": rh,
                        "lhs": rep.lhs,
                        "rhs": rep.rhs,
                        "lhs_normalized": rep.lhs_normalized,
                        "rhs_normalized": rep.rhs_normalized,
                        "condition_holds": rep.condition_holds,
                        "bound_holds": rep.bound_holds,
                        "intermediate_lhs": rep.intermediate_lhs,
                        "intermediate_rhs": rep.intermediate_rhs,
                    }
                )
    return records, _table5_csv(records)


def _table5_csv(records) -> str:
    buf = io.StringIO()
    fields = [
        "partition", "rank_h", "trials", "lhs_mean", "lhs_std",
        "lhs_normalized_mean", "rhs_mean", "rhs_std", "condition_held",
        "violations", "ref_lhs_mean", "ref_rhs_mean",
    ]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    keys = []
    for r in records:
        if (r["partition"], r["rank_h"]) not in keys:
            keys.append((r["partition"], r["rank_h"]))
    for name, rh in keys:
        sel = [r for r in records if r["partition"] == name and r["rank_h"] == rh]
        lhs = np.array([r["lhs"] for r in sel])
        rhs = np.array([r["rhs"] for r in sel])
        ddof = 1 if len(sel) > 1 else 0
        w.writerow(
            {
                "partition": name,
                "rank_h": rh,
                "trials": len(sel),
                "lhs_mean": _fmt(float(lhs.mean())),
                "lhs_std": _fmt(float(lhs.std(ddof=ddof))),
                "lhs_normalized_mean": _fmt(float(np.mean([r["lhs_normalized"] for r in sel]))),
                "rhs_mean": _fmt(float(rhs.mean())),
                "rhs_std": _fmt(float(rhs.std(ddof=ddof))),
                "condition_held": sum(r["condition_holds"] for r in sel),
                "violations": sum(r["condition_holds"] and not r["bound_holds"] for r in sel),
                "ref_lhs_mean": _fmt(TABLE5_REFERENCE.get(("lhs", name), (None,))[0]),
                "ref_rhs_mean": _fmt(TABLE5_REFERENCE.get(("rhs", rh), (None,))[0]),
            }
        )
    return buf.getvalue()


def complexity_estimate(order: int, mode_length: int, clusters: int, iters: int) -> dict:
    """Operation-count terms of a one-scale MS-HoSVD with uniform sizes.

    ``hosvd`` is N I^(N+1), ``partition`` is N I^N c i for Lloyd iterations,
    and ``subtensors`` is c^N N (I/c)^(N+1).
    """
    n, i, c = order, mode_length, clusters
    terms = {
        "hosvd": Fraction(n * i ** (n + 1)),
        "partition": Fraction(n * i**n * c * iters),
        "subtensors": c**n * n * Fraction(i, c) ** (n + 1),
    }
    terms["total"] = sum(terms.values())
    return {k: int(v) if v.denominator == 1 else float(v) for k, v in terms.items()}
