import struct

import numpy as np
import pytest

from cimleak.adc import SarAdcConfig, build_energy_lut
from cimleak.device import DeviceConfig, LayerGeometry, map_weights
from cimleak.sim import PhaseTiming, emit_trace, run_layer
from cimleak.tensorio import (FormatError, read_tensor, read_trace, save_png,
                              write_tensor, write_trace)

RNG = np.random.default_rng(1234)


@pytest.mark.parametrize("dtype", [np.uint8, np.float32])
@pytest.mark.parametrize("rank", [1, 2, 3, 4])
def test_tensor_roundtrip_bit_identical(tmp_path, dtype, rank):
    shape = tuple(RNG.integers(1, 6, rank))
    if dtype == np.uint8:
        arr = RNG.integers(0, 256, shape).astype(np.uint8)
    else:
        arr = RNG.normal(0, 1, shape).astype(np.float32)
    path = tmp_path / "t.cimt"
    write_tensor(path, arr)
    back = read_tensor(path)
    assert back.dtype == arr.dtype
    assert back.shape == arr.shape
    assert back.tobytes() == arr.tobytes()


def test_tensor_rejects_unsupported_dtype(tmp_path):
    with pytest.raises(FormatError):
        write_tensor(tmp_path / "t.cimt", np.zeros((2, 2), dtype=np.float64))


def test_tensor_rejects_rank_zero(tmp_path):
    with pytest.raises(FormatError):
        write_tensor(tmp_path / "t.cimt", np.float32(3.0))


def test_tensor_rejects_empty(tmp_path):
    with pytest.raises(FormatError):
        write_tensor(tmp_path / "t.cimt", np.zeros((0, 3), dtype=np.float32))


def test_reader_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.cimt"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(FormatError):
        read_tensor(path)


def test_reader_rejects_bad_version(tmp_path):
    path = tmp_path / "bad.cimt"
    path.write_bytes(b"CIMT" + struct.pack("<HBB", 9, 1, 1) + struct.pack("<I", 1) + bytes(4))
    with pytest.raises(FormatError):
        read_tensor(path)


def test_reader_rejects_bad_dtype_code(tmp_path):
    path = tmp_path / "bad.cimt"
    path.write_bytes(b"CIMT" + struct.pack("<HBB", 1, 7, 1) + struct.pack("<I", 1) + bytes(4))
    with pytest.raises(FormatError):
        read_tensor(path)


def test_reader_rejects_short_payload(tmp_path):
    path = tmp_path / "short.cimt"
    write_tensor(path, np.arange(12, dtype=np.float32).reshape(3, 4))
    data = path.read_bytes()
    path.write_bytes(data[:-4])
    with pytest.raises(FormatError):
        read_tensor(path)


def test_reader_rejects_trailing_bytes(tmp_path):
    path = tmp_path / "long.cimt"
    write_tensor(path, np.arange(12, dtype=np.float32).reshape(3, 4))
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(FormatError):
        read_tensor(path)


def test_reader_rejects_zero_dimension(tmp_path):
    path = tmp_path / "zdim.cimt"
    path.write_bytes(b"CIMT" + struct.pack("<HBB", 1, 0, 2) + struct.pack("<II", 2, 0))
    with pytest.raises(FormatError):
        read_tensor(path)


def _tiny_trace():
    dev = DeviceConfig()
    geom = LayerGeometry(out_channels=4)
    q = np.random.default_rng(0).integers(-127, 128, (4, 1, 3, 3)).astype(np.int8)
    tiles = map_weights(q, geom, dev)
    adc = SarAdcConfig().with_full_scale(dev, geom.kernel_rows)
    lut = build_energy_lut(adc)
    img = np.random.default_rng(1).integers(0, 256, (2, 2)).astype(np.uint8)
    grid = run_layer(img, geom, tiles, dev, adc, lut)
    return emit_trace(grid, PhaseTiming(), 1e9)


def test_trace_roundtrip(tmp_path):
    trace = _tiny_trace()
    path = tmp_path / "trace.cimp"
    write_trace(path, trace)
    back = read_trace(path)
    assert back.sample_rate == trace.sample_rate
    assert back.segments == trace.segments
    # samples persist as float32
    assert np.array_equal(back.samples, trace.samples.astype(np.float32).astype(np.float64))


def test_trace_truncation_detected(tmp_path):
    trace = _tiny_trace()
    path = tmp_path / "trace.cimp"
    write_trace(path, trace)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(FormatError):
        read_trace(path)


def test_trace_bad_magic(tmp_path):
    path = tmp_path / "x.cimp"
    path.write_bytes(b"JUNKJUNKJUNK")
    with pytest.raises(FormatError):
        read_trace(path)


def test_save_png(tmp_path):
    from PIL import Image

    img = RNG.integers(0, 256, (16, 16)).astype(np.uint8)
    path = tmp_path / "m.png"
    save_png(path, img)
    with Image.open(path) as back:
        assert np.array_equal(np.asarray(back), img)
    with pytest.raises(ValueError):
        save_png(tmp_path / "bad.png", img.astype(np.float32))
