"""Multi-level RRAM device model and weight-to-conductance column mapping.

An 8-bit signed weight is stored on four 4-bit devices in the same crossbar
row: the magnitude is split into a high and a low nibble, and each nibble
goes to a positive or a negative column depending on the weight sign. Dot
products are recovered digitally as 16*(MSB+ - MSB-) + (LSB+ - LSB-).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

# Column roles, in physical order within each output channel's group of four.
MSB_POS = "MSB+"
MSB_NEG = "MSB-"
LSB_POS = "LSB+"
LSB_NEG = "LSB-"
COLUMN_ROLES = (MSB_POS, MSB_NEG, LSB_POS, LSB_NEG)
COLS_PER_CHANNEL = 4


@dataclass(frozen=True)
class DeviceConfig:
    """Programmable conductance device and the read condition.

    Defaults are a plausible RRAM operating range, not measured values;
    every field is configurable.
    """

    g_min: float = 2e-6      # siemens
    g_max: float = 62e-6     # siemens
    num_levels: int = 16     # 4-bit device
    v_read: float = 0.2      # volts

    def __post_init__(self) -> None:
        if not self.g_max > self.g_min >= 0.0:
            raise ValueError(f"need g_max > g_min >= 0, got {self.g_min}, {self.g_max}")
        if self.num_levels < 2:
            raise ValueError(f"need num_levels >= 2, got {self.num_levels}")
        if self.v_read <= 0.0:
            raise ValueError(f"need v_read > 0, got {self.v_read}")

    @property
    def level_step(self) -> float:
        """Conductance increment between adjacent levels (linear spacing)."""
        return (self.g_max - self.g_min) / (self.num_levels - 1)


@dataclass(frozen=True)
class LayerGeometry:
    """Shape of the convolution layer under attack and its tile resources."""

    kernel: int = 3
    in_channels: int = 1
    out_channels: int = 32
    stride: int = 1
    padding: int = 1
    tile_rows: int = 128
    tile_cols: int = 128
    adcs_per_tile: int = 4

    def __post_init__(self) -> None:
        for name in ("kernel", "in_channels", "out_channels", "stride",
                     "tile_rows", "tile_cols", "adcs_per_tile"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.padding < 0:
            raise ValueError("padding must be >= 0")
        if self.tile_cols % self.adcs_per_tile != 0:
            raise ValueError("tile_cols must be divisible by adcs_per_tile")
        if self.tile_cols % COLS_PER_CHANNEL != 0:
            raise ValueError("tile_cols must be divisible by 4 (MSB/LSB x polarity)")

    @property
    def kernel_rows(self) -> int:
        """Crossbar rows used by one flattened kernel: K^2 * C_in."""
        return self.kernel * self.kernel * self.in_channels

    @property
    def total_cols(self) -> int:
        """Crossbar columns used by the layer: 4 * C_out."""
        return COLS_PER_CHANNEL * self.out_channels

    @property
    def adc_executions(self) -> int:
        """Sequential conversion groups needed to read one full tile."""
        return self.tile_cols // self.adcs_per_tile

    def output_shape(self, height: int, width: int) -> tuple[int, int]:
        h = (height + 2 * self.padding - self.kernel) // self.stride + 1
        w = (width + 2 * self.padding - self.kernel) // self.stride + 1
        if h < 1 or w < 1:
            raise ValueError(f"geometry yields empty output for {height}x{width} input")
        return h, w


@dataclass
class ConductanceTile:
    """Quantized level indices for one crossbar tile plus column bookkeeping.

    `column_roles[c]` is a (role, output_channel) pair; `row_offset` is the
    index of the first flattened-kernel row this tile holds (nonzero when a
    kernel is split across row blocks).
    """

    levels: np.ndarray                       # uint8 [rows, cols]
    config: DeviceConfig
    column_roles: list[tuple[str, int]] = field(default_factory=list)
    row_offset: int = 0

    def __post_init__(self) -> None:
        self.levels = np.asarray(self.levels)
        if self.levels.ndim != 2:
            raise ValueError("tile levels must be a 2-D matrix")
        if self.levels.min(initial=0) < 0 or self.levels.max(initial=0) > self.config.num_levels - 1:
            raise ValueError("level index out of device range")
        if len(self.column_roles) != self.levels.shape[1]:
            raise ValueError("column_roles must cover every column")
        self.levels = self.levels.astype(np.uint8)

    @property
    def rows(self) -> int:
        return self.levels.shape[0]

    @property
    def cols(self) -> int:
        return self.levels.shape[1]

    def conductances(self) -> np.ndarray:
        """Device conductance matrix in siemens (float64)."""
        cfg = self.config
        return cfg.g_min + self.levels.astype(np.float64) * cfg.level_step


def level_to_conductance(level: int, cfg: DeviceConfig) -> float:
    """Map a level index onto the linear conductance ladder."""
    if not 0 <= level < cfg.num_levels:
        raise ValueError(f"level {level} outside [0, {cfg.num_levels - 1}]")
    return cfg.g_min + level * cfg.level_step


def quantize_weights(weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetric int8 quantization: scale = max|w|/127, q in [-127, 127].

    An all-zero tensor quantizes to zeros with scale 0.0 (logged, not fatal).
    """
    w = np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    max_abs = float(np.max(np.abs(w))) if w.size else 0.0
    if max_abs == 0.0:
        log.warning("all-zero weight tensor; quantizing to zeros with scale 0")
        return np.zeros(w.shape, dtype=np.int8), 0.0
    scale = max_abs / 127.0
    q = np.clip(np.rint(w / scale), -127, 127).astype(np.int8)
    return q, scale


def _split_nibbles(q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-weight level indices for the MSB+/MSB-/LSB+/LSB- columns."""
    mag = np.abs(q.astype(np.int16)).astype(np.uint8)
    msb = mag >> 4
    lsb = mag & 0xF
    pos = q > 0
    neg = q < 0
    return (np.where(pos, msb, 0).astype(np.uint8),
            np.where(neg, msb, 0).astype(np.uint8),
            np.where(pos, lsb, 0).astype(np.uint8),
            np.where(neg, lsb, 0).astype(np.uint8))


def map_weights(q: np.ndarray, geom: LayerGeometry, cfg: DeviceConfig) -> list[ConductanceTile]:
    """Map quantized kernels onto conductance tiles.

    Each kernel flattens to a K^2*C_in row vector; each output channel takes
    four adjacent columns (MSB+, MSB-, LSB+, LSB-). Layers exceeding one
    tile's rows or columns are split across tiles row-major.
    """
    q = np.asarray(q)
    expected = (geom.out_channels, geom.in_channels, geom.kernel, geom.kernel)
    if q.shape != expected:
        raise ValueError(f"weight shape {q.shape} does not match geometry {expected}")
    if np.abs(q.astype(np.int16)).max(initial=0) > 127:
        raise ValueError("quantized weights must lie in [-127, 127]")
    if cfg.num_levels < 16:
        raise ValueError("nibble mapping needs at least 16 device levels")

    flat = q.reshape(geom.out_channels, geom.kernel_rows)   # [C_out, R]
    msb_p, msb_n, lsb_p, lsb_n = _split_nibbles(flat)

    # Full-layer level matrix [R, 4*C_out] with the per-channel column quads.
    full = np.zeros((geom.kernel_rows, geom.total_cols), dtype=np.uint8)
    full[:, 0::4] = msb_p.T
    full[:, 1::4] = msb_n.T
    full[:, 2::4] = lsb_p.T
    full[:, 3::4] = lsb_n.T

    channels_per_tile = geom.tile_cols // COLS_PER_CHANNEL
    row_blocks = math.ceil(geom.kernel_rows / geom.tile_rows)
    col_blocks = math.ceil(geom.out_channels / channels_per_tile)

    tiles = []
    for rb in range(row_blocks):
        r0 = rb * geom.tile_rows
        r1 = min(r0 + geom.tile_rows, geom.kernel_rows)
        for cb in range(col_blocks):
            ch0 = cb * channels_per_tile
            ch1 = min(ch0 + channels_per_tile, geom.out_channels)
            block = full[r0:r1, ch0 * COLS_PER_CHANNEL:ch1 * COLS_PER_CHANNEL]
            roles = [(COLUMN_ROLES[i % 4], ch0 + i // 4) for i in range(block.shape[1])]
            tiles.append(ConductanceTile(block.copy(), cfg, roles, row_offset=r0))
    return tiles


def reconstruct_weights(tiles: list[ConductanceTile], geom: LayerGeometry) -> np.ndarray:
    """Digital readback of the mapped levels: 16*(MSB+ - MSB-) + (LSB+ - LSB-).

    Inverse of map_weights; used as the mapping roundtrip oracle.
    """
    flat = np.zeros((geom.out_channels, geom.kernel_rows), dtype=np.int64)
    for tile in tiles:
        lv = tile.levels.astype(np.int64)
        r0, r1 = tile.row_offset, tile.row_offset + tile.rows
        for c in range(0, tile.cols, COLS_PER_CHANNEL):
            _, channel = tile.column_roles[c]
            contrib = 16 * (lv[:, c] - lv[:, c + 1]) + (lv[:, c + 2] - lv[:, c + 3])
            flat[channel, r0:r1] = contrib
    return flat.reshape(geom.out_channels, geom.in_channels, geom.kernel, geom.kernel)


def perturbed_conductances(tile: ConductanceTile, sigma: float, seed: int = 0) -> np.ndarray:
    """Conductances with per-device Gaussian programming error (robustness knob).

    sigma is relative to the level step. Values clip to [g_min, g_max]; the
    fast simulator always uses the nominal (deterministic) levels.
    """
    rng = np.random.default_rng(seed)
    g = tile.conductances()
    g = g + rng.normal(0.0, sigma * tile.config.level_step, size=g.shape)
    return np.clip(g, tile.config.g_min, tile.config.g_max)
