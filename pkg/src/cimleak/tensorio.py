"""Binary interchange formats: CIMT tensors and serialized power traces.

CIMT layout (little endian throughout):

    magic   4 bytes  b"CIMT"
    version u16      1
    dtype   u8       0 = uint8, 1 = float32
    rank    u8       1..8
    dims    rank*u32 each >= 1
    payload row-major (C order), exactly prod(dims) * itemsize bytes

Traces serialize as b"CIMP", version u16, u32 JSON-header length, the UTF-8
header (sample_rate plus the segment index table) and float32 samples.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .sim import PowerTrace, TraceSegment

TENSOR_MAGIC = b"CIMT"
TRACE_MAGIC = b"CIMP"
FORMAT_VERSION = 1
MAX_RANK = 8

_DTYPE_CODES = {np.dtype(np.uint8): 0, np.dtype(np.float32): 1}
_CODE_DTYPES = {0: np.dtype(np.uint8), 1: np.dtype(np.float32)}


class FormatError(ValueError):
    """Malformed interchange file."""


def write_tensor(path, array: np.ndarray) -> None:
    """Write a uint8 or float32 tensor; other dtypes must be converted first."""
    if np.asarray(array).ndim == 0:
        raise FormatError("rank-0 tensors are not representable")
    arr = np.ascontiguousarray(array)
    if arr.dtype not in _DTYPE_CODES:
        raise FormatError(f"unsupported dtype {arr.dtype}; convert to uint8 or float32")
    if not 1 <= arr.ndim <= MAX_RANK:
        raise FormatError(f"rank must be in [1, {MAX_RANK}], got {arr.ndim}")
    if arr.size == 0:
        raise FormatError("zero-sized tensors are not representable")
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<HBB", FORMAT_VERSION, _DTYPE_CODES[arr.dtype], arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 8 or data[:4] != TENSOR_MAGIC:
        raise FormatError(f"{path}: not a CIMT tensor (bad magic)")
    version, dtype_code, rank = struct.unpack_from("<HBB", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype_code not in _CODE_DTYPES:
        raise FormatError(f"{path}: unknown dtype code {dtype_code}")
    if not 1 <= rank <= MAX_RANK:
        raise FormatError(f"{path}: invalid rank {rank}")
    header_end = 8 + 4 * rank
    if len(data) < header_end:
        raise FormatError(f"{path}: truncated dimension table")
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    if any(d < 1 for d in dims):
        raise FormatError(f"{path}: non-positive dimension in {dims}")
    dtype = _CODE_DTYPES[dtype_code].newbyteorder("<")
    expected = int(np.prod(dims)) * dtype.itemsize
    payload = data[header_end:]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return np.ascontiguousarray(arr.astype(_CODE_DTYPES[dtype_code]))


def write_trace(path, trace: PowerTrace) -> None:
    """Serialize a power trace (samples stored as float32)."""
    header = {
        "sample_rate": trace.sample_rate,
        "num_samples": len(trace.samples),
        "segments": [[s.row, s.col, s.bit, s.phase, s.start, s.count]
                     for s in trace.segments],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(TRACE_MAGIC)
        f.write(struct.pack("<HI", FORMAT_VERSION, len(blob)))
        f.write(blob)
        f.write(np.asarray(trace.samples, dtype="<f4").tobytes())


def read_trace(path) -> PowerTrace:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 10 or data[:4] != TRACE_MAGIC:
        raise FormatError(f"{path}: not a CIMP trace (bad magic)")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if len(data) < 10 + hlen:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(data[10:10 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad JSON header: {exc}") from exc
    payload = data[10 + hlen:]
    n = header.get("num_samples", -1)
    if len(payload) != 4 * n:
        raise FormatError(f"{path}: expected {n} float32 samples, got {len(payload) // 4}")
    samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    segments = [TraceSegment(r, c, b, ph, st, ct)
                for r, c, b, ph, st, ct in header["segments"]]
    return PowerTrace(header["sample_rate"], samples, segments)


def save_png(path, data: np.ndarray) -> None:
    """Write a uint8 matrix as a grayscale PNG (visual inspection only)."""
    from PIL import Image

    arr = np.asarray(data)
    if arr.dtype != np.uint8 or arr.ndim != 2:
        raise ValueError("PNG export expects a 2-D uint8 matrix")
    Image.fromarray(arr, mode="L").save(path)
