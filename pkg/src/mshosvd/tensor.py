"""Dense N-mode tensors and the multilinear primitives built on them.

Elements are stored first-index-fastest (Fortran order).  The mode-n
unfolding places mode-n fibers in columns, with the remaining indices
ordered i_1 fastest, ..., i_N slowest (mode n skipped), which is the
ordering under which

    (X x_1 U1 ... x_N UN)_(n) = Un X_(n) (UN kron ... kron U1, skipping Un)^T

holds literally.  Modes are 0-based throughout the Python API.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

__all__ = [
    "DenseTensor",
    "as_tensor",
    "unfold",
    "fold",
    "mode_n_product",
    "multi_mode_product",
    "inner_product",
    "norm",
    "add",
    "subtract",
    "scale",
]


class DenseTensor:
    """Immutable dense tensor of 64-bit floats.

    Parameters
    ----------
    array : array_like
        Values indexed as ``array[i_1, ..., i_N]``.  Copied and frozen.

    Use :meth:`from_flat` to build one from a flat first-index-fastest buffer.
    """

    __slots__ = ("_array",)

    def __init__(self, array):
        arr = np.array(array, dtype=np.float64, order="F", copy=True)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if any(n < 1 for n in arr.shape):
            raise ValueError(f"every mode length must be >= 1, got {arr.shape}")
        arr.flags.writeable = False
        self._array = arr

    @classmethod
    def from_flat(cls, shape: Sequence[int], data) -> "DenseTensor":
        shape = tuple(int(n) for n in shape)
        if len(shape) < 1:
            raise ValueError("a tensor needs at least one mode")
        flat = np.asarray(data, dtype=np.float64).ravel()
        if flat.size != int(np.prod(shape)):
            raise ValueError(
                f"data length {flat.size} does not match shape {shape} "
                f"(expected {int(np.prod(shape))})"
            )
        return cls(flat.reshape(shape, order="F"))

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "DenseTensor":
        return cls(np.zeros(tuple(shape), order="F"))

    @property
    def array(self) -> np.ndarray:
        """Read-only ndarray view of the values."""
        return self._array

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def ndim(self) -> int:
        return self._array.ndim

    @property
    def size(self) -> int:
        return self._array.size

    @property
    def data(self) -> np.ndarray:
        """Flat values in first-index-fastest order."""
        return self._array.ravel(order="F")

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._array
        return self._array.astype(dtype)

    def __repr__(self):
        return f"DenseTensor(shape={self.shape})"

    def __eq__(self, other):
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._array, other._array)

    __hash__ = None

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return subtract(self, other)

    def __mul__(self, s):
        return scale(self, s)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


TensorLike = Union[DenseTensor, np.ndarray]


def as_tensor(t: TensorLike) -> DenseTensor:
    if isinstance(t, DenseTensor):
        return t
    return DenseTensor(t)


def _check_mode(mode: int, ndim: int) -> int:
    if not isinstance(mode, (int, np.integer)) or not 0 <= mode < ndim:
        raise ValueError(f"mode must be in [0, {ndim}), got {mode!r}")
    return int(mode)


def unfold_array(arr: np.ndarray, mode: int) -> np.ndarray:
    # moveaxis + Fortran reshape gives i_1 fastest over the remaining modes
    return np.reshape(np.moveaxis(arr, mode, 0), (arr.shape[mode], -1), order="F")


def fold_array(mat: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    shape = tuple(shape)
    rest = shape[:mode] + shape[mode + 1:]
    arr = np.reshape(mat, (shape[mode],) + rest, order="F")
    return np.moveaxis(arr, 0, mode)


def mode_dot_array(arr: np.ndarray, mat: np.ndarray, mode: int) -> np.ndarray:
    out = np.tensordot(mat, arr, axes=(1, mode))
    return np.moveaxis(out, 0, mode)


def unfold(t: TensorLike, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization, shape ``(I_mode, prod of the other I)``."""
    t = as_tensor(t)
    mode = _check_mode(mode, t.ndim)
    return np.array(unfold_array(t.array, mode), order="F")


def fold(mat, mode: int, shape: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`unfold`."""
    mat = np.asarray(mat, dtype=np.float64)
    shape = tuple(int(n) for n in shape)
    mode = _check_mode(mode, len(shape))
    if mat.ndim != 2:
        raise ValueError("fold expects a matrix")
    expected = (shape[mode], int(np.prod(shape)) // shape[mode])
    if mat.shape != expected:
        raise ValueError(f"matrix shape {mat.shape} incompatible with mode {mode} of {shape}")
    return DenseTensor(fold_array(mat, mode, shape))


def mode_n_product(t: TensorLike, u, mode: int) -> DenseTensor:
    """Compute ``t x_mode u``; the result replaces I_mode by ``u.shape[0]``."""
    t = as_tensor(t)
    mode = _check_mode(mode, t.ndim)
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] != t.shape[mode]:
        raise ValueError(
            f"matrix with shape {u.shape} cannot act on mode {mode} of length {t.shape[mode]}"
        )
    return DenseTensor(mode_dot_array(t.array, u, mode))


def multi_mode_product(t: TensorLike, mats, modes=None, transpose=False) -> DenseTensor:
    """Apply a sequence of mode products in the given mode order.

    ``mats[i]`` acts on ``modes[i]`` (default: mode i).  With ``transpose``
    each matrix is transposed first, as needed for projecting onto factors.
    """
    t = as_tensor(t)
    if modes is None:
        modes = range(len(mats))
    arr = t.array
    for m, u in zip(modes, mats):
        _check_mode(m, t.ndim)
        u = np.asarray(u, dtype=np.float64)
        if transpose:
            u = u.T
        if u.ndim != 2 or u.shape[1] != arr.shape[m]:
            raise ValueError(f"matrix with shape {u.shape} cannot act on mode {m}")
        arr = mode_dot_array(arr, u, m)
    return DenseTensor(arr)


def _check_same_shape(a: DenseTensor, b: DenseTensor):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def inner_product(a: TensorLike, b: TensorLike) -> float:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b)
    return float(np.dot(a.data, b.data))


def norm(t: TensorLike) -> float:
    t = as_tensor(t)
    return float(np.sqrt(np.dot(t.data, t.data)))


def add(a: TensorLike, b: TensorLike) -> DenseTensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b)
    return DenseTensor(a.array + b.array)


def subtract(a: TensorLike, b: TensorLike) -> DenseTensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b)
    return DenseTensor(a.array - b.array)


def scale(t: TensorLike, s: float) -> DenseTensor:
    return DenseTensor(float(s) * as_tensor(t).array)
