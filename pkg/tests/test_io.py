import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mshosvd.io import (
    FormatError,
    load_tree,
    read_tensor,
    save_tree,
    tensor_from_bytes,
    tensor_to_bytes,
    write_tensor,
)
from mshosvd.partition import RandomPartitioner
from mshosvd.tensor import DenseTensor
from mshosvd.tree import TreeConfig, build, prune, reconstruct_tree

GOLDEN_2x3 = (
    b"MSTN"
    + struct.pack("<HH", 1, 2)
    + struct.pack("<QQ", 2, 3)
    + struct.pack("<6d", 0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
)


class TestTensorFile:
    def test_golden_bytes(self):
        t = DenseTensor.from_flat((2, 3), np.arange(6.0))
        assert tensor_to_bytes(t) == GOLDEN_2x3

    def test_golden_decode(self):
        t = tensor_from_bytes(GOLDEN_2x3)
        assert t.shape == (2, 3)
        assert t.array[1, 0] == 1.0 and t.array[0, 1] == 2.0

    def test_file_round_trip(self, tmp_path, rng):
        t = DenseTensor(rng.standard_normal((3, 4, 5)))
        path = tmp_path / "t.mstn"
        write_tensor(path, t)
        assert read_tensor(path) == t
        assert path.stat().st_size == 8 + 3 * 8 + 60 * 8

    @given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.integers(0, 2**31 - 1))
    def test_round_trip_is_bit_exact(self, shape, seed):
        arr = np.random.default_rng(seed).standard_normal(shape) * 10.0 ** np.random.default_rng(seed).integers(-300, 300)
        arr.flat[0] = -0.0
        back = tensor_from_bytes(tensor_to_bytes(arr))
        assert back.array.tobytes() == DenseTensor(arr).array.tobytes()

    def test_special_values_survive(self):
        arr = np.array([np.inf, -np.inf, 5e-324, -0.0])
        back = tensor_from_bytes(tensor_to_bytes(arr)).array
        assert back.tobytes() == arr.tobytes()

    @pytest.mark.parametrize(
        "data, message",
        [
            (b"XXXX" + GOLDEN_2x3[4:], "magic"),
            (GOLDEN_2x3[:4] + struct.pack("<H", 2) + GOLDEN_2x3[6:], "version"),
            (GOLDEN_2x3[:-1], "truncated"),
            (GOLDEN_2x3[:10], "truncated"),
            (GOLDEN_2x3 + b"\0", "trailing"),
            (b"MS", "truncated"),
        ],
    )
    def test_malformed(self, data, message):
        with pytest.raises(FormatError, match=message):
            tensor_from_bytes(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "absent.mstn")


class TestTreeArchive:
    def test_round_trip(self, tmp_path, rng):
        x = rng.standard_normal((8, 6, 4))
        tree = build(x, TreeConfig((2, 2, 1), 2, ranks=((2, 2, 2), (1, 1, 1)), partitioner=RandomPartitioner(3)))
        save_tree(tree, tmp_path / "a")
        back = load_tree(tmp_path / "a")
        assert [(n.scale, n.id) for n in back.nodes()] == [(n.scale, n.id) for n in tree.nodes()]
        assert back.config.to_dict() == tree.config.to_dict()
        for j in range(3):
            assert reconstruct_tree(back, j).array.tobytes() == reconstruct_tree(tree, j).array.tobytes()

    def test_resave_is_byte_identical(self, tmp_path, rng):
        x = rng.standard_normal((6, 6))
        tree, _ = prune(x, TreeConfig((2, 2), 1, ranks=((1, 1),)), 0.01)
        save_tree(tree, tmp_path / "a")
        save_tree(load_tree(tmp_path / "a"), tmp_path / "b")
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FormatError):
            load_tree(tmp_path)

    def test_missing_blob(self, tmp_path, rng):
        tree = build(rng.standard_normal((4, 4)), TreeConfig((2, 2), 1, ranks=((1, 1),)))
        save_tree(tree, tmp_path / "a")
        (tmp_path / "a" / "node_1_3.mstn").unlink()
        with pytest.raises(FormatError):
            load_tree(tmp_path / "a")
