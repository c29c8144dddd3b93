"""Deterministic SVD and energy-based rank selection.

The SVD is a Householder QR followed by one-sided (Hestenes) Jacobi on the
small triangular factor.  Jacobi pairs are visited in round-robin
tournament order so that each round rotates disjoint column pairs at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["SvdResult", "svd", "orthonormalize", "rank_by_energy", "truncate"]

JACOBI_TOL = 1e-12
MAX_SWEEPS = 200


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``m = left_vectors @ diag(singular_values) @ right_vectors.T``."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


@lru_cache(maxsize=None)
def _tournament(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Round-robin schedule of disjoint pairs over ``n`` (even) players."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array([min(players[i], players[n - 1 - i]) for i in range(half)])
        q = np.array([max(players[i], players[n - 1 - i]) for i in range(half)])
        rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _householder_qr(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of a tall matrix (rows >= cols)."""
    m, n = a.shape
    r = np.array(a, dtype=np.float64, copy=True)
    vs = []
    for j in range(n):
        x = r[j:, j]
        alpha = np.sqrt(np.dot(x, x))
        if alpha == 0.0:
            vs.append(None)
            continue
        v = x.copy()
        v[0] += alpha if x[0] >= 0 else -alpha
        v /= np.sqrt(np.dot(v, v))
        r[j:, j:] -= 2.0 * np.outer(v, v @ r[j:, j:])
        vs.append(v)
    q = np.zeros((m, n))
    q[:n, :n] = np.eye(n)
    for j in range(n - 1, -1, -1):
        v = vs[j]
        if v is not None:
            q[j:, :] -= 2.0 * np.outer(v, v @ q[j:, :])
    return q, np.triu(r[:n, :])


def _one_sided_jacobi(a: np.ndarray, tol: float, max_sweeps: int):
    """Orthogonalize the columns of ``a``: returns (a @ v, v)."""
    n = a.shape[1]
    pad = n % 2
    w = np.zeros((a.shape[0], n + pad))
    w[:, :n] = a
    v = np.eye(n + pad)
    rounds = _tournament(n + pad)
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not active.any():
                continue
            rotated = True
            g = np.where(active, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * g)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = np.where(active, 1.0 / np.sqrt(1.0 + t * t), 1.0)
            s = np.where(active, c * t, 0.0)
            w[:, p], w[:, q] = c * wp - s * wq, s * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break
    else:
        raise RuntimeError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
    return w[:, :n], v[:n, :n]


def _complete_orthonormal(u: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Replace columns where ``good`` is False by an orthonormal completion."""
    u = u.copy()
    basis = [u[:, j] for j in range(u.shape[1]) if good[j]]
    candidate = 0
    for j in np.flatnonzero(~good):
        while True:
            e = np.zeros(u.shape[0])
            e[candidate] = 1.0
            candidate += 1
            for _ in range(2):
                for b in basis:
                    e -= np.dot(b, e) * b
            nrm = np.sqrt(np.dot(e, e))
            if nrm > 0.5:
                break
        u[:, j] = e / nrm
        basis.append(u[:, j])
    return u


def _tall_svd(b: np.ndarray, tol: float, max_sweeps: int):
    q, r = _householder_qr(b)
    w, v = _one_sided_jacobi(r, tol, max_sweeps)
    sigma = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-sigma, kind="stable")
    sigma, w, v = sigma[order], w[:, order], v[:, order]
    good = sigma > sigma[0] * max(b.shape) * np.finfo(float).eps if sigma.size else sigma > 0
    ur = np.zeros_like(w)
    ur[:, good] = w[:, good] / sigma[good]
    if not good.all():
        ur = _complete_orthonormal(ur, good)
    return q @ ur, sigma, v


def svd(m, tol: float = JACOBI_TOL, max_sweeps: int = MAX_SWEEPS) -> SvdResult:
    """Thin singular value decomposition.

    Singular values are returned non-increasing.  Each left singular vector
    is signed so that its largest-magnitude entry (first one on ties) is
    positive, with the matching right vector flipped alongside.

    Raises
    ------
    ValueError
        If ``m`` is not a finite 2-D array.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("svd expects a 2-D matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("svd input contains non-finite entries")
    rows, cols = a.shape
    if rows >= cols:
        u, s, v = _tall_svd(a, tol, max_sweeps)
    else:
        v, s, u = _tall_svd(a.T, tol, max_sweeps)
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[idx, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return SvdResult(u * signs, s, v * signs)


def orthonormalize(a) -> np.ndarray:
    """Orthonormal basis (Householder Q) for the columns of a tall matrix."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ValueError("orthonormalize expects a tall 2-D matrix")
    return _householder_qr(a)[0]


def rank_by_energy(singular_values, tau: float) -> int:
    """Smallest rank whose leading singular values carry a ``tau`` fraction of the total.

    The energy is the plain sum of singular values (not of their squares).
    """
    s = np.asarray(singular_values, dtype=np.float64)
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if s.size == 0 or np.any(s < 0):
        raise ValueError("singular values must be non-empty and non-negative")
    if np.any(np.diff(s) > 0):
        raise ValueError("singular values must be sorted non-increasing")
    cum = np.cumsum(s)
    total = cum[-1]
    if total == 0.0:
        raise ValueError("all singular values are zero")
    # the last cumsum entry is exactly total, so tau = 1 always terminates
    return int(np.argmax(cum / total >= tau)) + 1


def truncate(s: SvdResult, r: int) -> np.ndarray:
    """The first ``r`` left singular vectors."""
    k = s.left_vectors.shape[1]
    if not 1 <= r <= k:
        raise ValueError(f"rank must be in [1, {k}], got {r}")
    return s.left_vectors[:, :r].copy()
