import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mshosvd.hosvd import (
    core_property_check,
    hosvd_full,
    hosvd_truncated,
    reconstruct,
)
from mshosvd.tensor import mode_n_product


def low_rank(shape, ranks, seed):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal(ranks)
    for n, (i, r) in enumerate(zip(shape, ranks)):
        t = mode_n_product(t, rng.standard_normal((i, r)), n).array
    return t


def test_full_reconstruction(rng):
    x = rng.standard_normal((6, 7, 8))
    f = hosvd_full(x)
    rel = np.linalg.norm(reconstruct(f).array - x) / np.linalg.norm(x)
    assert rel < 1e-12
    for u in f.factors:
        np.testing.assert_allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-12)


def test_full_core_properties(rng):
    assert core_property_check(hosvd_full(rng.standard_normal((4, 5, 3)))).passed


def test_core_check_detects_disorder(rng):
    f = hosvd_full(rng.standard_normal((3, 3, 3)))
    flipped = type(f)(
        type(f.core)(f.core.array[::-1]), (f.factors[0][:, ::-1],) + f.factors[1:], f.original_shape
    )
    assert not core_property_check(flipped).passed


def test_stored_elements_small_case(rng):
    f = hosvd_truncated(rng.standard_normal((4, 4, 4)), ranks=(2, 2, 2))
    assert f.ranks == (2, 2, 2)
    assert f.stored_elements() == 8 + 3 * 4 * 2


def test_truncation_is_exact_for_low_rank():
    x = low_rank((6, 5, 4), (2, 3, 2), 0)
    f = hosvd_truncated(x, ranks=(2, 3, 2))
    assert np.linalg.norm(reconstruct(f).array - x) / np.linalg.norm(x) < 1e-12


def test_tau_one_is_lossless(rng):
    x = rng.standard_normal((3, 4, 5))
    f = hosvd_truncated(x, tau=1.0)
    assert np.linalg.norm(reconstruct(f).array - x) < 1e-12 * np.linalg.norm(x)


@pytest.mark.parametrize("tau", [0.5, 0.8, 0.95])
def test_tau_selects_ranks_per_mode(tau):
    x = np.random.default_rng(1).standard_normal((6, 5, 4))
    expected = []
    for n in range(3):
        s = np.linalg.svd(np.moveaxis(x, n, 0).reshape(x.shape[n], -1), compute_uv=False)
        frac = np.cumsum(s) / s.sum()
        expected.append(int(np.sum(frac < tau)) + 1)
    assert hosvd_truncated(x, tau=tau).ranks == tuple(expected)


def test_truncated_factors_come_from_the_original_unfoldings(rng):
    x = rng.standard_normal((5, 4, 3))
    full = hosvd_full(x)
    f = hosvd_truncated(x, ranks=(2, 2, 2))
    for u, v in zip(f.factors, full.factors):
        np.testing.assert_array_equal(u, v[:, :2])


def test_error_decreases_with_rank(rng):
    x = rng.standard_normal((6, 6, 6))
    errs = [
        np.linalg.norm(x - reconstruct(hosvd_truncated(x, ranks=(r, r, r))).array)
        for r in range(1, 7)
    ]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_rank_beyond_unfolding_rank_is_clamped():
    x = np.random.default_rng(0).standard_normal((6, 2, 2))
    f = hosvd_truncated(x, ranks=(6, 2, 2))
    assert f.ranks == (4, 2, 2)


def test_zero_tensor_energy_mode():
    f = hosvd_truncated(np.zeros((3, 3)), tau=0.5)
    assert f.ranks == (1, 1)


@pytest.mark.parametrize(
    "kwargs",
    [{}, {"ranks": (1, 1), "tau": 0.5}, {"ranks": (0, 1)}, {"ranks": (4, 1)}, {"ranks": (1,)}, {"tau": 0.0}],
)
def test_invalid_arguments(kwargs):
    with pytest.raises(ValueError):
        hosvd_truncated(np.ones((3, 3)), **kwargs)


@given(st.lists(st.integers(1, 5), min_size=2, max_size=4).map(tuple), st.integers(0, 2**31 - 1))
def test_core_properties_random(shape, seed):
    x = np.random.default_rng(seed).standard_normal(shape)
    f = hosvd_full(x)
    assert core_property_check(f).passed
    assert np.linalg.norm(reconstruct(f).array - x) <= 1e-12 * max(np.linalg.norm(x), 1.0)
