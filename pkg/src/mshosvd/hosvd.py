"""Higher-order SVD: full and truncated Tucker factorizations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .linalg import rank_by_energy, svd, truncate
from .tensor import DenseTensor, TensorLike, as_tensor, mode_dot_array, unfold_array

__all__ = [
    "TuckerFactors",
    "CoreCheck",
    "hosvd_full",
    "hosvd_truncated",
    "reconstruct",
    "core_property_check",
]


@dataclass(frozen=True)
class TuckerFactors:
    """Core tensor and one orthonormal-column factor per mode."""

    core: DenseTensor
    factors: tuple
    original_shape: tuple

    def __post_init__(self):
        if len(self.factors) != self.core.ndim:
            raise ValueError("one factor matrix per mode is required")
        for n, (u, i_n, r_n) in enumerate(zip(self.factors, self.original_shape, self.core.shape)):
            if u.shape != (i_n, r_n):
                raise ValueError(f"factor {n} has shape {u.shape}, expected {(i_n, r_n)}")

    @property
    def ranks(self) -> tuple:
        return self.core.shape

    def stored_elements(self) -> int:
        return int(np.prod(self.ranks)) + sum(i * r for i, r in zip(self.original_shape, self.ranks))


def _mode_svds(arr: np.ndarray):
    return [svd(unfold_array(arr, n)) for n in range(arr.ndim)]


def _assemble(arr: np.ndarray, factors) -> TuckerFactors:
    core = arr
    for n, u in enumerate(factors):
        core = mode_dot_array(core, u.T, n)
    return TuckerFactors(DenseTensor(core), tuple(factors), arr.shape)


def hosvd_full(t: TensorLike) -> TuckerFactors:
    """Untruncated HoSVD; ``reconstruct`` of the result returns ``t``.

    Each factor holds all min(I_n, prod of the other modes) left singular
    vectors of the mode-n unfolding; further columns would only multiply
    zero core slices.
    """
    arr = as_tensor(t).array
    factors = [s.left_vectors.copy() for s in _mode_svds(arr)]
    return _assemble(arr, factors)


def hosvd_truncated(
    t: TensorLike,
    ranks: Optional[Sequence[int]] = None,
    tau: Optional[float] = None,
) -> TuckerFactors:
    """Truncated HoSVD with explicit per-mode ranks or a shared energy threshold.

    Every mode's SVD is taken on the unfolding of ``t`` itself (not of a
    partially projected tensor).  Exactly one of ``ranks`` and ``tau`` must
    be given.  Ranks above the number of available singular vectors of an
    unfolding are reduced to that number.
    """
    arr = as_tensor(t).array
    if (ranks is None) == (tau is None):
        raise ValueError("give exactly one of ranks or tau")
    if ranks is not None:
        ranks = [int(r) for r in ranks]
        if len(ranks) != arr.ndim:
            raise ValueError(f"expected {arr.ndim} ranks, got {len(ranks)}")
        for n, (r, i_n) in enumerate(zip(ranks, arr.shape)):
            if not 1 <= r <= i_n:
                raise ValueError(f"rank {r} for mode {n} outside [1, {i_n}]")
    elif not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")

    factors = []
    for n, s in enumerate(_mode_svds(arr)):
        avail = s.left_vectors.shape[1]
        if ranks is not None:
            r = min(ranks[n], avail)
        elif s.singular_values[0] == 0.0:
            r = 1
        else:
            r = rank_by_energy(s.singular_values, tau)
        factors.append(truncate(s, r))
    return _assemble(arr, factors)


def reconstruct(f: TuckerFactors) -> DenseTensor:
    """``core x_1 U1 x_2 U2 ... x_N UN``."""
    arr = f.core.array
    for n, u in enumerate(f.factors):
        arr = mode_dot_array(arr, u, n)
    return DenseTensor(arr)


@dataclass(frozen=True)
class CoreCheck:
    passed: bool
    max_orthogonality_violation: float
    max_ordering_violation: float


def core_property_check(
    f: TuckerFactors, orth_tol: float = 1e-8, order_tol: float = 1e-10
) -> CoreCheck:
    """Check all-orthogonality and slice-norm ordering of a HoSVD core.

    Orthogonality violations are measured relative to ``||C||^2``; ordering
    violations are absolute increases of the slice norm.
    """
    c = f.core.array
    total = float(np.sum(c * c))
    worst_orth = 0.0
    worst_order = 0.0
    for n in range(c.ndim):
        m = unfold_array(c, n)
        gram = m @ m.T
        off = gram - np.diag(np.diag(gram))
        if off.size and total > 0:
            worst_orth = max(worst_orth, float(np.max(np.abs(off))) / total)
        slice_norms = np.sqrt(np.diag(gram))
        if slice_norms.size > 1:
            worst_order = max(worst_order, float(np.max(np.diff(slice_norms), initial=0.0)))
    passed = worst_orth <= orth_tol and worst_order <= order_tol
    return CoreCheck(passed, worst_orth, worst_order)
