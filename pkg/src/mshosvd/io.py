"""Binary tensor files and on-disk tree archives.

A tensor file is the ASCII magic ``MSTN``, a little-endian u16 format
version, a u16 mode count ``N``, ``N`` u64 mode lengths, then the entries
as little-endian f64 with the first index varying fastest.

A tree archive is a directory holding ``manifest.json`` (configuration,
topology, index maps, partitions) and one ``node_<scale>_<id>.mstn`` blob
per node containing the core followed by the ``N`` factor matrices as
consecutive tensor-file records.
"""

from __future__ import annotations

import io
import json
import os
import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .hosvd import TuckerFactors
from .partition import PartitionSpec
from .tensor import DenseTensor, TensorLike, as_tensor
from .tree import MsNode, MsTree, TreeConfig

__all__ = [
    "FormatError",
    "MAGIC",
    "VERSION",
    "write_tensor",
    "read_tensor",
    "tensor_to_bytes",
    "tensor_from_bytes",
    "save_tree",
    "load_tree",
    "dump_json",
]

MAGIC = b"MSTN"
VERSION = 1
_HEADER = struct.Struct("<4sHH")

PathLike = Union[str, os.PathLike]


class FormatError(ValueError):
    """Malformed or unsupported tensor file / archive."""


def _write_record(fh: BinaryIO, arr: np.ndarray):
    fh.write(_HEADER.pack(MAGIC, VERSION, arr.ndim))
    fh.write(np.asarray(arr.shape, dtype="<u8").tobytes())
    fh.write(np.asarray(arr, dtype="<f8").tobytes(order="F"))


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what}: expected {n} bytes, got {len(buf)}")
    return buf


def _read_record(fh: BinaryIO) -> np.ndarray:
    magic, version, ndim = _HEADER.unpack(_read_exact(fh, _HEADER.size, "header"))
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    shape = tuple(int(v) for v in np.frombuffer(_read_exact(fh, 8 * ndim, "mode lengths"), "<u8"))
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    payload = np.frombuffer(_read_exact(fh, 8 * count, "payload"), "<f8")
    return payload.astype(np.float64).reshape(shape, order="F")


def tensor_to_bytes(t: TensorLike) -> bytes:
    buf = io.BytesIO()
    _write_record(buf, as_tensor(t).array)
    return buf.getvalue()


def tensor_from_bytes(data: bytes) -> DenseTensor:
    fh = io.BytesIO(data)
    arr = _read_record(fh)
    if fh.read(1):
        raise FormatError("trailing bytes after payload")
    return DenseTensor(arr)


def write_tensor(path: PathLike, t: TensorLike):
    Path(path).write_bytes(tensor_to_bytes(t))


def read_tensor(path: PathLike) -> DenseTensor:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return tensor_from_bytes(data)


def dump_json(obj) -> str:
    """Canonical JSON text (sorted keys, fixed indent, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _blob_name(node: MsNode) -> str:
    return f"node_{node.scale}_{node.id}.mstn"


def save_tree(tree: MsTree, directory: PathLike):
    """Write ``tree`` as a manifest plus one blob per node."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    nodes = []
    for node in tree.nodes():
        with open(d / _blob_name(node), "wb") as fh:
            _write_record(fh, node.factors.core.array)
            for u in node.factors.factors:
                _write_record(fh, u)
        nodes.append(
            {
                "scale": node.scale,
                "id": node.id,
                "ranks": list(node.factors.ranks),
                "index_map": [np.asarray(ix).tolist() for ix in node.index_map],
                "children": [c.id for c in node.children],
                "partition": None
                if node.partition is None
                else [lab.tolist() for lab in node.partition.labels],
                "blob": _blob_name(node),
            }
        )
    manifest = {
        "format": "mshosvd-tree",
        "version": VERSION,
        "shape": list(tree.shape),
        "config": tree.config.to_dict(),
        "objective_history": [float(h) for h in tree.objective_history],
        "nodes": nodes,
    }
    (d / "manifest.json").write_text(dump_json(manifest))


def load_tree(directory: PathLike) -> MsTree:
    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read tree manifest in {d}: {exc}") from exc
    if manifest.get("format") != "mshosvd-tree" or manifest.get("version") != VERSION:
        raise FormatError("not a supported tree archive")
    try:
        shape = tuple(manifest["shape"])
        config = TreeConfig.from_dict(manifest["config"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed tree manifest: {exc}") from exc
    by_key = {}
    try:
        for rec in manifest["nodes"]:
            index_map = tuple(np.asarray(ix, dtype=np.int64) for ix in rec["index_map"])
            with open(d / rec["blob"], "rb") as fh:
                core = _read_record(fh)
                factors = tuple(_read_record(fh) for _ in range(core.ndim))
                if fh.read(1):
                    raise FormatError(f"trailing bytes in {rec['blob']}")
            sub_shape = tuple(ix.size for ix in index_map)
            tf = TuckerFactors(DenseTensor(core), factors, sub_shape)
            part = None if rec["partition"] is None else PartitionSpec(tuple(rec["partition"]))
            by_key[(rec["scale"], rec["id"])] = (MsNode(rec["scale"], rec["id"], index_map, tf, part), rec)
    except (OSError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed tree archive: {exc}") from exc
    for (scale, _), (node, rec) in by_key.items():
        for cid in rec["children"]:
            if (scale + 1, cid) not in by_key:
                raise FormatError(f"missing child {cid} at scale {scale + 1}")
            node.children.append(by_key[(scale + 1, cid)][0])
    if (0, 0) not in by_key:
        raise FormatError("archive has no root node")
    return MsTree(by_key[(0, 0)][0], config, shape, list(manifest["objective_history"]))
