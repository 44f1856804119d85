import numpy as np
import pytest

from cimleak.device import (ConductanceTile, DeviceConfig, LayerGeometry,
                            level_to_conductance, map_weights,
                            perturbed_conductances, quantize_weights,
                            reconstruct_weights)

CFG = DeviceConfig()  # 2 uS .. 62 uS, 16 levels


def test_level_endpoints():
    assert level_to_conductance(0, CFG) == pytest.approx(2e-6)
    assert level_to_conductance(15, CFG) == pytest.approx(62e-6)


def test_level_linear_midpoint():
    # 2 + 8 * 4 = 34 uS on the linear ladder
    assert level_to_conductance(8, CFG) == pytest.approx(34e-6)


def test_level_strictly_increasing():
    g = [level_to_conductance(v, CFG) for v in range(CFG.num_levels)]
    assert all(b > a for a, b in zip(g, g[1:]))


@pytest.mark.parametrize("level", [-1, 16, 100])
def test_level_out_of_range(level):
    with pytest.raises(ValueError):
        level_to_conductance(level, CFG)


def test_device_config_validation():
    with pytest.raises(ValueError):
        DeviceConfig(g_min=5e-6, g_max=5e-6)
    with pytest.raises(ValueError):
        DeviceConfig(g_min=-1e-6)
    with pytest.raises(ValueError):
        DeviceConfig(num_levels=1)
    with pytest.raises(ValueError):
        DeviceConfig(v_read=0.0)


def test_quantize_zero_tensor():
    q, scale = quantize_weights(np.zeros((2, 1, 3, 3)))
    assert scale == 0.0
    assert not q.any()


def test_quantize_max_entry_hits_127():
    w = np.array([0.1, -0.4, 1.27, 0.0])
    q, scale = quantize_weights(w)
    assert q[2] == 127
    assert scale == pytest.approx(0.01)


def test_quantize_rounding_bound():
    rng = np.random.default_rng(42)
    w = rng.normal(0, 3, (8, 3, 3, 3))
    q, scale = quantize_weights(w)
    assert np.abs(q).max() <= 127
    err = np.abs(w / scale - q)
    # clipping never triggers under symmetric scaling, so pure rounding error
    assert err.max() <= 0.5 + 1e-12


def test_quantize_rejects_nonfinite():
    with pytest.raises(ValueError):
        quantize_weights(np.array([1.0, np.nan]))


def _single_weight_geom():
    return LayerGeometry(kernel=1, in_channels=1, out_channels=1, stride=1,
                         padding=0, tile_rows=128, tile_cols=128)


def test_map_positive_127():
    geom = _single_weight_geom()
    q = np.array([127], dtype=np.int8).reshape(1, 1, 1, 1)
    (tile,) = map_weights(q, geom, CFG)
    # column order per channel: MSB+, MSB-, LSB+, LSB-
    assert tile.levels.tolist() == [[7, 0, 15, 0]]
    assert [r for r, _ in tile.column_roles] == ["MSB+", "MSB-", "LSB+", "LSB-"]


def test_map_negative_one():
    geom = _single_weight_geom()
    q = np.array([-1], dtype=np.int8).reshape(1, 1, 1, 1)
    (tile,) = map_weights(q, geom, CFG)
    assert tile.levels.tolist() == [[0, 0, 0, 1]]


def test_map_roundtrip_exhaustive_all_values():
    # every representable weight once, spread over several column tiles
    values = np.arange(-127, 128, dtype=np.int8)
    geom = LayerGeometry(kernel=1, in_channels=1, out_channels=values.size,
                         stride=1, padding=0)
    q = values.reshape(values.size, 1, 1, 1)
    tiles = map_weights(q, geom, CFG)
    assert len(tiles) == int(np.ceil(4 * values.size / geom.tile_cols))
    back = reconstruct_weights(tiles, geom)
    assert np.array_equal(back, q.astype(np.int64))


def test_map_polarity_exclusive():
    rng = np.random.default_rng(7)
    geom = LayerGeometry(kernel=3, in_channels=2, out_channels=8, padding=1)
    q = rng.integers(-127, 128, (8, 2, 3, 3)).astype(np.int8)
    (tile,) = map_weights(q, geom, CFG)
    lv = tile.levels
    for c in range(0, tile.cols, 4):
        for pos, neg in ((lv[:, c], lv[:, c + 1]), (lv[:, c + 2], lv[:, c + 3])):
            assert not np.any((pos > 0) & (neg > 0))


def test_map_exact_row_and_column_counts():
    geom = LayerGeometry(kernel=3, in_channels=4, out_channels=8, padding=1)
    q = np.zeros((8, 4, 3, 3), dtype=np.int8)
    (tile,) = map_weights(q, geom, CFG)
    assert tile.levels.shape == (geom.kernel_rows, geom.total_cols) == (36, 32)


def test_map_row_split_across_tiles():
    rng = np.random.default_rng(3)
    geom = LayerGeometry(kernel=3, in_channels=4, out_channels=2, padding=1,
                         tile_rows=16, tile_cols=128)
    q = rng.integers(-127, 128, (2, 4, 3, 3)).astype(np.int8)
    tiles = map_weights(q, geom, CFG)
    assert [t.rows for t in tiles] == [16, 16, 4]
    assert [t.row_offset for t in tiles] == [0, 16, 32]
    assert np.array_equal(reconstruct_weights(tiles, geom), q.astype(np.int64))


def test_map_rejects_bad_shape_and_range():
    geom = _single_weight_geom()
    with pytest.raises(ValueError):
        map_weights(np.zeros((2, 1, 1, 1), dtype=np.int8), geom, CFG)
    with pytest.raises(ValueError):
        map_weights(np.array([200]).reshape(1, 1, 1, 1), geom, CFG)


def test_tile_rejects_out_of_range_levels():
    with pytest.raises(ValueError):
        ConductanceTile(np.array([[16]]), CFG, [("MSB+", 0)])


def test_geometry_properties_and_validation():
    geom = LayerGeometry()
    assert geom.kernel_rows == 9
    assert geom.total_cols == 128
    assert geom.adc_executions == 32
    assert geom.output_shape(256, 256) == (256, 256)
    assert LayerGeometry(padding=0).output_shape(4, 4) == (2, 2)
    with pytest.raises(ValueError):
        LayerGeometry(padding=0).output_shape(2, 2)
    with pytest.raises(ValueError):
        LayerGeometry(tile_cols=126)
    with pytest.raises(ValueError):
        LayerGeometry(adcs_per_tile=3, tile_cols=128)


def test_perturbed_conductances_knob():
    geom = _single_weight_geom()
    q = np.array([64], dtype=np.int8).reshape(1, 1, 1, 1)
    (tile,) = map_weights(q, geom, CFG)
    nominal = tile.conductances()
    assert np.array_equal(perturbed_conductances(tile, 0.0, seed=1), nominal)
    g1 = perturbed_conductances(tile, 0.5, seed=1)
    g2 = perturbed_conductances(tile, 0.5, seed=1)
    assert np.array_equal(g1, g2)
    assert not np.array_equal(g1, nominal)
    assert g1.min() >= CFG.g_min and g1.max() <= CFG.g_max
