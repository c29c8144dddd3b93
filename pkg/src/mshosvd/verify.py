"""Randomized self-checks of the multilinear identities and the error bound.

``fault`` names a deliberately broken code path.  It exists so tests can
confirm that each suite really turns red when something is wrong.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .analysis import run_table5
from .linalg import orthonormalize
from .tensor import inner_product, mode_n_product, norm, unfold

__all__ = ["CheckResult", "TheoryResult", "algebra_suite", "theory_suite", "ALGEBRA_CHECKS", "FAULTS"]

FAULTS = ("kronecker-order", "bound-lhs")


@dataclass(frozen=True)
class CheckResult:
    name: str
    instances: int
    worst: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.instances} instances, worst {self.worst:.3e} (tol {self.tolerance:.0e})"


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(a - b)) / scale


def _random_case(rng):
    n_modes = int(rng.integers(2, 5))
    shape = tuple(int(v) for v in rng.integers(1, 6, size=n_modes))
    return rng.standard_normal(shape), shape


def _projector(rng, i: int) -> np.ndarray:
    r = int(rng.integers(0, i + 1))
    if r == 0:
        return np.zeros((i, i))
    q = orthonormalize(rng.standard_normal((i, r)))
    return q @ q.T


def _check_linearity_tensor(rng):
    x, shape = _random_case(rng)
    y = rng.standard_normal(shape)
    n = int(rng.integers(len(shape)))
    u = rng.standard_normal((int(rng.integers(1, 6)), shape[n]))
    a, b = rng.standard_normal(2)
    lhs = mode_n_product(a * x + b * y, u, n).array
    rhs = a * mode_n_product(x, u, n).array + b * mode_n_product(y, u, n).array
    return _rel(lhs, rhs)


def _check_linearity_matrix(rng):
    x, shape = _random_case(rng)
    n = int(rng.integers(len(shape)))
    j = int(rng.integers(1, 6))
    u, v = rng.standard_normal((j, shape[n])), rng.standard_normal((j, shape[n]))
    a, b = rng.standard_normal(2)
    lhs = mode_n_product(x, a * u + b * v, n).array
    rhs = a * mode_n_product(x, u, n).array + b * mode_n_product(x, v, n).array
    return _rel(lhs, rhs)


def _check_commuting_modes(rng):
    x, shape = _random_case(rng)
    n, m = (int(v) for v in rng.choice(len(shape), size=2, replace=False))
    u = rng.standard_normal((int(rng.integers(1, 6)), shape[n]))
    v = rng.standard_normal((int(rng.integers(1, 6)), shape[m]))
    lhs = mode_n_product(mode_n_product(x, u, n), v, m).array
    rhs = mode_n_product(mode_n_product(x, v, m), u, n).array
    return _rel(lhs, rhs)


def _check_same_mode(rng):
    x, shape = _random_case(rng)
    n = int(rng.integers(len(shape)))
    j = int(rng.integers(1, 6))
    u = rng.standard_normal((j, shape[n]))
    w = rng.standard_normal((int(rng.integers(1, 6)), j))
    lhs = mode_n_product(mode_n_product(x, u, n), w, n).array
    rhs = mode_n_product(x, w @ u, n).array
    return _rel(lhs, rhs)


def _check_isometry(rng):
    x, shape = _random_case(rng)
    y = rng.standard_normal(shape)
    worst = 0.0
    for n in range(len(shape)):
        xn, yn = unfold(x, n), unfold(y, n)
        worst = max(
            worst,
            _rel(norm(x), np.linalg.norm(xn)),
            _rel(inner_product(x, y), np.trace(xn.T @ yn)),
        )
    return worst


def _check_kronecker(rng, fault=None):
    x, shape = _random_case(rng)
    mats = [rng.standard_normal((int(rng.integers(1, 6)), i)) for i in shape]
    y = x
    for n, u in enumerate(mats):
        y = mode_n_product(y, u, n)
    worst = 0.0
    for n in range(len(shape)):
        others = [mats[m] for m in reversed(range(len(shape))) if m != n]
        if fault == "kronecker-order":
            others = others[::-1]
        kron = reduce(np.kron, others)
        worst = max(worst, _rel(unfold(y, n), mats[n] @ unfold(x, n) @ kron.T))
    return worst


def _check_split(rng):
    x, shape = _random_case(rng)
    n = int(rng.integers(len(shape)))
    p = _projector(rng, shape[n])
    a = mode_n_product(x, p, n)
    b = mode_n_product(x, np.eye(shape[n]) - p, n)
    scale = norm(x) ** 2
    return max(
        abs(norm(x) ** 2 - norm(a) ** 2 - norm(b) ** 2) / scale,
        abs(inner_product(a, b)) / scale,
    )


def _check_multimode_pythagoras(rng):
    x, shape = _random_case(rng)
    ps = [_projector(rng, i) for i in shape]
    full = x
    for n, p in enumerate(ps):
        full = mode_n_product(full, p, n)
    lhs = norm(x - full.array) ** 2
    rhs = 0.0
    partial = x
    for n, p in enumerate(ps):
        rhs += norm(mode_n_product(partial, np.eye(shape[n]) - p, n)) ** 2
        partial = mode_n_product(partial, p, n)
    return abs(lhs - rhs) / norm(x) ** 2


ALGEBRA_CHECKS = {
    "mode product linear in the tensor": _check_linearity_tensor,
    "mode product linear in the matrix": _check_linearity_matrix,
    "products along distinct modes commute": _check_commuting_modes,
    "repeated product along one mode composes": _check_same_mode,
    "unfolding preserves norms and inner products": _check_isometry,
    "unfolding matches the Kronecker form": _check_kronecker,
    "orthogonal split is Pythagorean": _check_split,
    "multi-mode projection error telescopes": _check_multimode_pythagoras,
}


def algebra_suite(
    instances: int = 1000, seed: int = 0, tol: float = 1e-9, fault: Optional[str] = None
) -> list:
    """Run every algebraic identity on ``instances`` random tensors."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    results = []
    for k, (name, check) in enumerate(ALGEBRA_CHECKS.items()):
        rng = np.random.default_rng([seed, k])
        worst = 0.0
        for _ in range(instances):
            err = check(rng, fault) if check is _check_kronecker else check(rng)
            worst = max(worst, err)
        results.append(CheckResult(name, instances, worst, tol, worst <= tol))
    return results


@dataclass(frozen=True)
class TheoryResult:
    trials: int
    condition_held: int
    violations: int
    intermediate_violations: int
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} error bound: {self.trials} cases, condition held in "
            f"{self.condition_held}, {self.violations} bound violations, "
            f"{self.intermediate_violations} intermediate-bound violations"
        )


def theory_suite(
    seeds: Sequence[int] = tuple(range(20)),
    rank_hs: Sequence[int] = (4, 6, 8),
    fault: Optional[str] = None,
) -> TheoryResult:
    """Check the first-scale bound on synthetic tensors wherever its precondition holds."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    records, _ = run_table5(seeds=seeds, rank_hs=tuple(rank_hs))
    held = violations = intermediate_violations = 0
    for rec in records:
        if not rec["condition_holds"]:
            continue
        held += 1
        lhs = rec["lhs"] * 100.0 if fault == "bound-lhs" else rec["lhs"]
        violations += lhs > rec["rhs"]
        intermediate_violations += lhs > rec["intermediate_rhs"]
    return TheoryResult(
        len(records), held, violations, intermediate_violations, violations == 0 and intermediate_violations == 0
    )
