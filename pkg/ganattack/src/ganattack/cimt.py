"""Reader/writer for the CIMT tensor interchange format and dataset manifests.

This package talks to the simulator side only through files, so the format
is implemented here against its documented layout: magic "CIMT", u16
version 1, u8 dtype (0 = uint8, 1 = float32), u8 rank, rank x u32 dims,
little-endian C-order payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CIMT"
VERSION = 1
_DTYPES = {0: np.dtype(np.uint8), 1: np.dtype(np.float32)}
_CODES = {np.dtype(np.uint8): 0, np.dtype(np.float32): 1}


class CimtError(ValueError):
    """Malformed CIMT file."""


def read_tensor(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != MAGIC:
        raise CimtError(f"{path}: bad magic")
    version, dtype_code, rank = struct.unpack_from("<HBB", data, 4)
    if version != VERSION:
        raise CimtError(f"{path}: unsupported version {version}")
    if dtype_code not in _DTYPES or not 1 <= rank <= 8:
        raise CimtError(f"{path}: bad dtype/rank ({dtype_code}, {rank})")
    if len(data) < 8 + 4 * rank:
        raise CimtError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    dtype = _DTYPES[dtype_code]
    payload = data[8 + 4 * rank:]
    if len(payload) != int(np.prod(dims)) * dtype.itemsize:
        raise CimtError(f"{path}: payload length mismatch")
    return np.frombuffer(payload, dtype=dtype.newbyteorder("<")).reshape(dims).astype(dtype)


def write_tensor(path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array)
    if arr.dtype not in _CODES or arr.ndim < 1:
        raise CimtError(f"cannot encode dtype {arr.dtype} rank {arr.ndim}")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HBB", VERSION, _CODES[arr.dtype], arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())


def load_manifest(path) -> dict:
    path = Path(path)
    with open(path) as f:
        manifest = json.load(f)
    if "samples" not in manifest:
        raise CimtError(f"{path}: manifest has no samples")
    manifest["_root"] = str(path.parent)
    return manifest


def manifest_samples(manifest: dict, split: str | None = None,
                     noise_level: float | None = None) -> list[dict]:
    """Filter manifest entries by split and/or noise level."""
    out = []
    for s in manifest["samples"]:
        if split is not None and s["split"] != split:
            continue
        if noise_level is not None and abs(s["noise_level"] - noise_level) > 1e-9:
            continue
        out.append(s)
    return out
