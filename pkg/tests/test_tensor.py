import itertools
from functools import reduce

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mshosvd.tensor import (
    DenseTensor,
    add,
    fold,
    inner_product,
    mode_n_product,
    multi_mode_product,
    norm,
    scale,
    subtract,
    unfold,
)

shapes = st.lists(st.integers(1, 4), min_size=1, max_size=4).map(tuple)


def brute_unfold(arr, n):
    """Column index counts the other modes with the earliest mode fastest."""
    shape = arr.shape
    others = [m for m in range(arr.ndim) if m != n]
    out = np.zeros((shape[n], int(np.prod([shape[m] for m in others], dtype=int))))
    for idx in itertools.product(*(range(s) for s in shape)):
        col, stride = 0, 1
        for m in others:
            col += idx[m] * stride
            stride *= shape[m]
        out[idx[n], col] = arr[idx]
    return out


def brute_mode_product(arr, u, n):
    shape = list(arr.shape)
    shape[n] = u.shape[0]
    out = np.zeros(shape)
    for idx in itertools.product(*(range(s) for s in shape)):
        total = 0.0
        for i in range(arr.shape[n]):
            src = list(idx)
            src[n] = i
            total += u[idx[n], i] * arr[tuple(src)]
        out[idx] = total
    return out


def seeded(shape, seed):
    return np.random.default_rng(seed).standard_normal(shape)


class TestDenseTensor:
    def test_flat_order_is_first_index_fastest(self):
        t = DenseTensor.from_flat((2, 3), np.arange(6.0))
        assert t.array[1, 0] == 1.0
        assert t.array[0, 1] == 2.0
        np.testing.assert_array_equal(t.data, np.arange(6.0))

    def test_immutable(self):
        t = DenseTensor(np.ones((2, 2)))
        with pytest.raises(ValueError):
            t.array[0, 0] = 5.0

    def test_copy_on_construction(self):
        a = np.ones((2, 2))
        t = DenseTensor(a)
        a[0, 0] = 7.0
        assert t.array[0, 0] == 1.0

    def test_bad_flat_length(self):
        with pytest.raises(ValueError):
            DenseTensor.from_flat((2, 3), np.arange(5.0))

    def test_zero_length_mode_rejected(self):
        with pytest.raises(ValueError):
            DenseTensor(np.zeros((2, 0)))

    def test_arithmetic(self):
        a = DenseTensor(seeded((2, 3), 0))
        np.testing.assert_array_equal((a + a).array, 2 * a.array)
        np.testing.assert_array_equal((a - a).array, np.zeros((2, 3)))
        np.testing.assert_array_equal((-a).array, -a.array)
        assert add(a, DenseTensor.zeros((2, 3))) == a
        assert scale(a, 1.0) == a
        with pytest.raises(ValueError):
            subtract(a, DenseTensor.zeros((3, 2)))


class TestUnfold:
    def test_matrix_mode0_is_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(unfold(m, 0), m)

    def test_three_mode_small_case(self):
        t = DenseTensor.from_flat((2, 2, 2), np.arange(1.0, 9.0))
        # first row of the last-mode unfolding holds entries with i_3 = 0,
        # ordered i_1 fastest then i_2
        np.testing.assert_array_equal(unfold(t, 2)[0], [1.0, 2.0, 3.0, 4.0])
        np.testing.assert_array_equal(unfold(t, 2)[1], [5.0, 6.0, 7.0, 8.0])
        np.testing.assert_array_equal(unfold(t, 0)[0], [1.0, 3.0, 5.0, 7.0])
        assert fold(unfold(t, 2), 2, (2, 2, 2)) == t

    @pytest.mark.parametrize("shape", [(3, 4, 5), (2, 1, 3, 2), (5,)])
    def test_matches_brute_force(self, shape):
        arr = seeded(shape, 1)
        for n in range(len(shape)):
            np.testing.assert_array_equal(unfold(arr, n), brute_unfold(arr, n))

    def test_fold_scalar(self):
        t = fold(np.array([[5.0]]), 0, (1,))
        assert t.shape == (1,) and t.array[0] == 5.0

    def test_invalid_mode(self):
        with pytest.raises(ValueError):
            unfold(np.zeros((2, 2)), 2)
        with pytest.raises(ValueError):
            unfold(np.zeros((2, 2)), -1)

    def test_fold_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fold(np.zeros((2, 3)), 0, (2, 2))

    @given(shapes, st.integers(0, 2**31 - 1))
    def test_fold_unfold_round_trip_is_exact(self, shape, seed):
        t = DenseTensor(seeded(shape, seed))
        for n in range(len(shape)):
            assert fold(unfold(t, n), n, shape) == t

    @given(shapes, st.integers(0, 2**31 - 1))
    def test_isometry(self, shape, seed):
        a, b = seeded(shape, seed), seeded(shape, seed + 1)
        for n in range(len(shape)):
            assert np.isclose(norm(a), np.linalg.norm(unfold(a, n)), rtol=1e-12)
            assert np.isclose(
                inner_product(a, b), np.trace(unfold(a, n).T @ unfold(b, n)), rtol=1e-10, atol=1e-12
            )

    @given(shapes, st.integers(0, 2**31 - 1))
    def test_kronecker_identity(self, shape, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(shape)
        mats = [rng.standard_normal((int(rng.integers(1, 4)), i)) for i in shape]
        y = multi_mode_product(x, mats)
        for n in range(len(shape)):
            others = [mats[m] for m in reversed(range(len(shape))) if m != n]
            kron = reduce(np.kron, others, np.ones((1, 1)))
            expected = mats[n] @ unfold(x, n) @ kron.T
            np.testing.assert_allclose(unfold(y, n), expected, rtol=1e-10, atol=1e-12)


class TestModeProduct:
    def test_identity(self):
        arr = seeded((2, 3, 4), 2)
        for n in range(3):
            assert mode_n_product(arr, np.eye(arr.shape[n]), n) == DenseTensor(arr)

    def test_summing_rows(self):
        arr = seeded((2, 2, 2), 3)
        out = mode_n_product(arr, [[1.0, 1.0], [0.0, 0.0]], 0).array
        np.testing.assert_allclose(out[0], arr[0] + arr[1], rtol=1e-15)
        np.testing.assert_array_equal(out[1], 0.0)

    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_matches_brute_force(self, n):
        arr = seeded((2, 3, 4), 4)
        u = seeded((5, arr.shape[n]), 5)
        np.testing.assert_allclose(
            mode_n_product(arr, u, n).array, brute_mode_product(arr, u, n), rtol=1e-12
        )

    def test_unfolding_relation(self):
        arr = seeded((3, 4, 2), 6)
        u = seeded((5, 4), 7)
        np.testing.assert_allclose(unfold(mode_n_product(arr, u, 1), 1), u @ unfold(arr, 1), rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mode_n_product(np.zeros((2, 3)), np.zeros((2, 2)), 1)

    def test_multi_mode_transpose(self):
        arr = seeded((3, 4), 8)
        u, v = seeded((3, 2), 9), seeded((4, 2), 10)
        out = multi_mode_product(arr, [u, v], transpose=True)
        np.testing.assert_allclose(out.array, u.T @ arr @ v, rtol=1e-12)

    @given(shapes, st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
    def test_linear_in_tensor_and_matrix(self, shape, seed, a, b):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal(shape), rng.standard_normal(shape)
        n = int(rng.integers(len(shape)))
        u, v = rng.standard_normal((2, 2, shape[n]))
        lhs = mode_n_product(a * x + b * y, u, n).array
        rhs = a * mode_n_product(x, u, n).array + b * mode_n_product(y, u, n).array
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)
        lhs = mode_n_product(x, a * u + b * v, n).array
        rhs = a * mode_n_product(x, u, n).array + b * mode_n_product(x, v, n).array
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)

    @given(st.lists(st.integers(1, 4), min_size=2, max_size=4).map(tuple), st.integers(0, 2**31 - 1))
    def test_distinct_modes_commute_and_same_mode_composes(self, shape, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(shape)
        n, m = 0, len(shape) - 1
        u = rng.standard_normal((3, shape[n]))
        v = rng.standard_normal((2, shape[m]))
        np.testing.assert_allclose(
            mode_n_product(mode_n_product(x, u, n), v, m).array,
            mode_n_product(mode_n_product(x, v, m), u, n).array,
            rtol=1e-10,
            atol=1e-12,
        )
        w = rng.standard_normal((4, 3))
        np.testing.assert_allclose(
            mode_n_product(mode_n_product(x, u, n), w, n).array,
            mode_n_product(x, w @ u, n).array,
            rtol=1e-10,
            atol=1e-12,
        )


class TestInnerAndNorm:
    def test_values(self):
        z = DenseTensor.zeros((2, 3))
        assert norm(z) == 0.0
        one_hot = np.zeros((2, 3))
        one_hot[1, 2] = 1.0
        assert norm(one_hot) == 1.0
        t = seeded((2, 3), 11)
        assert inner_product(t, z) == 0.0
        assert np.isclose(inner_product(t, t), norm(t) ** 2, rtol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            inner_product(np.zeros((2, 3)), np.zeros((3, 2)))
