"""First-layer execution on mapped tiles with 8-bit bit-serial inputs.

Produces, per sliding window and per input bit, the analog array power and
the aggregate ADC conversion energy (all shared-ADC executions of a tile
summed), plus a functional digital readback of the convolution. A sampled
power trace (alternating ANALOG/ADC phases) can be emitted from the records.

All per-window quantities derive from exact integer sums (bit planes times
integer level matrices), so record grids are bit-identical regardless of
worker count or traversal order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adc import AdcEnergyLut, SarAdcConfig, codes_from_currents, full_scale_for
from .device import ConductanceTile, DeviceConfig, LayerGeometry

PHASE_ANALOG = "ANALOG"
PHASE_ADC = "ADC"

NUM_BITS = 8          # bit-serial input precision
_CHUNK_WINDOWS = 2048  # fixed work unit; independent of worker count


@dataclass
class BitSerialInput:
    """One flattened window as eight binary pulse planes (LSB first in time)."""

    window: np.ndarray   # uint8 [rows]

    def __post_init__(self) -> None:
        w = np.asarray(self.window)
        if w.ndim != 1:
            raise ValueError("window must be a flat vector")
        if w.dtype != np.uint8:
            if np.any((w < 0) | (w > 255)):
                raise ValueError("window values must lie in [0, 255]")
            w = w.astype(np.uint8)
        self.window = w

    def bit_plane(self, i: int) -> np.ndarray:
        if not 0 <= i < NUM_BITS:
            raise ValueError("bit index outside [0, 8)")
        return ((self.window >> i) & 1).astype(np.uint8)

    def planes(self) -> np.ndarray:
        return np.stack([self.bit_plane(i) for i in range(NUM_BITS)])

    def reconstruct(self) -> np.ndarray:
        """Sum of 2^i * plane_i; must reproduce the window exactly."""
        acc = np.zeros(self.window.shape, dtype=np.int64)
        for i in range(NUM_BITS):
            acc += (1 << i) * self.bit_plane(i).astype(np.int64)
        return acc


@dataclass
class ExecRecord:
    """Per-window execution record: one inference step of the first layer."""

    window_index: tuple[int, int]
    p_array: np.ndarray          # watts, [8]
    e_adc: np.ndarray            # joules, [8] (zeros when run without a LUT)
    output: np.ndarray           # digital dot-product estimate per channel
    codes: np.ndarray | None = None   # [8, total_cols] when kept


@dataclass
class RecordGrid:
    """Dense record arrays over the layer's output feature map."""

    p_array: np.ndarray          # [H, W, 8]
    e_adc: np.ndarray            # [H, W, 8]
    output: np.ndarray           # [H, W, C_out]
    geometry: LayerGeometry

    @property
    def shape(self) -> tuple[int, int]:
        return self.p_array.shape[:2]

    def record(self, row: int, col: int) -> ExecRecord:
        return ExecRecord((row, col), self.p_array[row, col],
                          self.e_adc[row, col], self.output[row, col])


@dataclass(frozen=True)
class PhaseTiming:
    """Durations of the two phases of one bit execution."""

    analog_s: float = 10e-9
    adc_s: float = 40e-9

    def __post_init__(self) -> None:
        if self.analog_s <= 0 or self.adc_s <= 0:
            raise ValueError("phase durations must be > 0")


@dataclass(frozen=True)
class TraceSegment:
    row: int
    col: int
    bit: int
    phase: str
    start: int
    count: int


@dataclass
class PowerTrace:
    """Sampled power waveform with per-(window, bit, phase) segment markers."""

    sample_rate: float           # Hz
    samples: np.ndarray          # watts, float64
    segments: list[TraceSegment]

    def tagged_samples(self):
        """Iterate (phase, power) pairs in time order."""
        for seg in self.segments:
            for k in range(seg.start, seg.start + seg.count):
                yield seg.phase, self.samples[k]


def sliding_windows(image: np.ndarray, geom: LayerGeometry) -> tuple[np.ndarray, tuple[int, int]]:
    """im2col: zero-pad, slide the K x K window, flatten in (C, K, K) order.

    Accepts [H, W] or [C_in, H, W] arrays of 8-bit pixel values. Returns the
    window matrix [n_windows, K^2*C_in] (row-major over the output map) and
    the output shape.
    """
    img = np.asarray(image)
    if img.ndim == 2:
        img = img[None, :, :]
    if img.ndim != 3 or img.shape[0] != geom.in_channels:
        raise ValueError(f"image shape {np.asarray(image).shape} does not match "
                         f"{geom.in_channels} input channels")
    if not np.issubdtype(img.dtype, np.integer):
        raise ValueError("image must be integer (quantize to [0, 255] first)")
    if img.min(initial=0) < 0 or img.max(initial=0) > 255:
        raise ValueError("pixel values must lie in [0, 255]")
    img = img.astype(np.uint8)

    c, h, w = img.shape
    out_h, out_w = geom.output_shape(h, w)
    p = geom.padding
    padded = np.pad(img, ((0, 0), (p, p), (p, p)))
    view = np.lib.stride_tricks.sliding_window_view(padded, (geom.kernel, geom.kernel), axis=(1, 2))
    view = view[:, ::geom.stride, ::geom.stride]          # [C, out_h, out_w, K, K]
    windows = view.transpose(1, 2, 0, 3, 4).reshape(out_h * out_w, geom.kernel_rows)
    return np.ascontiguousarray(windows), (out_h, out_w)


class _TileKernel:
    """Precomputed per-tile arrays for the vectorized execution kernel."""

    def __init__(self, tile: ConductanceTile, dev: DeviceConfig, adc: SarAdcConfig):
        self.levels = tile.levels.astype(np.float64)          # exact small ints
        self.row_level_sums = self.levels.sum(axis=1)
        self.rows = tile.rows
        self.cols = tile.cols
        self.row_offset = tile.row_offset
        self.adc = adc if adc.full_scale_current is not None else adc.with_full_scale(dev, tile.rows)
        channels = sorted({ch for _, ch in tile.column_roles})
        if channels != list(range(channels[0], channels[0] + len(channels))):
            raise ValueError("tile must cover a contiguous channel range")
        self.ch0 = channels[0]
        self.nch = len(channels)
        # code LSB current divided by the current of one level step
        lsb_current = self.adc.full_scale_current / self.adc.num_codes
        self.out_scale = lsb_current / (dev.v_read * dev.level_step)


def _prepare(tiles: list[ConductanceTile], geom: LayerGeometry,
             dev: DeviceConfig, adc: SarAdcConfig,
             lut: AdcEnergyLut | None) -> list[_TileKernel]:
    if not tiles:
        raise ValueError("no tiles supplied")
    if lut is not None:
        lc = lut.config
        if (lc.resolution, lc.v_ref, lc.c_unit, lc.topology) != \
                (adc.resolution, adc.v_ref, adc.c_unit, adc.topology):
            raise ValueError("energy LUT was built for a different ADC configuration")
    kernels = [_TileKernel(t, dev, adc) for t in tiles]
    total_rows = max(k.row_offset + k.rows for k in kernels)
    if total_rows != geom.kernel_rows:
        raise ValueError("tiles do not cover the layer's kernel rows")
    if sum(k.nch for k in kernels) != geom.out_channels * max(
            1, math.ceil(geom.kernel_rows / geom.tile_rows)):
        raise ValueError("tiles do not cover the layer's output channels")
    return kernels


def _simulate_chunk(windows: np.ndarray, kernels: list[_TileKernel],
                    dev: DeviceConfig, lut: AdcEnergyLut | None,
                    n_channels: int, keep_codes: bool):
    """Execute a block of windows; returns (p_array, e_adc, output, codes)."""
    m = windows.shape[0]
    p_array = np.zeros((m, NUM_BITS))
    e_adc = np.zeros((m, NUM_BITS))
    output = np.zeros((m, n_channels))
    total_cols = sum(k.cols for k in kernels)
    codes_out = np.zeros((m, NUM_BITS, total_cols), dtype=np.int64) if keep_codes else None

    v = dev.v_read
    g_min, g_step = dev.g_min, dev.level_step
    for i in range(NUM_BITS):
        planes = ((windows >> i) & 1).astype(np.float64)
        col0 = 0
        for k in kernels:
            b = planes[:, k.row_offset:k.row_offset + k.rows]
            n_active = b.sum(axis=1)                      # exact integers
            level_sum = b @ k.row_level_sums              # exact integers
            p_array[:, i] += (v * v) * (g_min * k.cols * n_active + g_step * level_sum)

            col_levels = b @ k.levels                     # exact integers [m, cols]
            currents = v * (g_min * n_active[:, None] + g_step * col_levels)
            codes = codes_from_currents(currents, k.adc)
            if lut is not None:
                e_adc[:, i] += lut.energies[codes].sum(axis=1)
            if keep_codes:
                codes_out[:, i, col0:col0 + k.cols] = codes

            delta = (16 * (codes[:, 0::4] - codes[:, 1::4])
                     + (codes[:, 2::4] - codes[:, 3::4]))
            output[:, k.ch0:k.ch0 + k.nch] += (float(1 << i) * k.out_scale) * delta
            col0 += k.cols
    return p_array, e_adc, output, codes_out


def array_bit_power(bits: np.ndarray, tile: ConductanceTile, cfg: DeviceConfig) -> float:
    """P = V_read^2 * sum of conductances of every driven device.

    Reference (per-device) implementation; the layer kernel reproduces it
    through integer row/column sums.
    """
    b = np.asarray(bits)
    if b.shape != (tile.rows,):
        raise ValueError(f"bit vector length {b.shape} != tile rows {tile.rows}")
    g = tile.conductances()
    return float(cfg.v_read ** 2 * g[b != 0, :].sum())


def adc_phase(bits: np.ndarray, tile: ConductanceTile, dev_cfg: DeviceConfig,
              adc_cfg: SarAdcConfig, lut: AdcEnergyLut) -> tuple[float, np.ndarray]:
    """Convert every tile column for one bit; energy is the sum over all
    shared-ADC execution groups (equivalently over all columns)."""
    b = np.asarray(bits)
    if b.shape != (tile.rows,):
        raise ValueError(f"bit vector length {b.shape} != tile rows {tile.rows}")
    adc = adc_cfg if adc_cfg.full_scale_current is not None else adc_cfg.with_full_scale(dev_cfg, tile.rows)
    currents = dev_cfg.v_read * (tile.conductances() * (b != 0)[:, None]).sum(axis=0)
    codes = codes_from_currents(currents, adc)
    return float(lut.energies[codes].sum()), codes


def run_window(window, tiles: list[ConductanceTile], geom: LayerGeometry,
               dev: DeviceConfig, adc: SarAdcConfig,
               lut: AdcEnergyLut | None = None,
               window_index: tuple[int, int] = (0, 0)) -> ExecRecord:
    """Execute one window bit-serially; keeps the per-bit column codes."""
    if isinstance(window, BitSerialInput):
        window = window.window
    w = np.asarray(window)
    if w.shape != (geom.kernel_rows,):
        raise ValueError(f"window length {w.shape} != kernel rows {geom.kernel_rows}")
    w = BitSerialInput(w).window[None, :]
    kernels = _prepare(tiles, geom, dev, adc, lut)
    p, e, out, codes = _simulate_chunk(w, kernels, dev, lut, geom.out_channels, keep_codes=True)
    return ExecRecord(window_index, p[0], e[0], out[0], codes[0])


def run_layer(image: np.ndarray, geom: LayerGeometry, tiles: list[ConductanceTile],
              dev: DeviceConfig, adc: SarAdcConfig,
              lut: AdcEnergyLut | None = None, workers: int = 1) -> RecordGrid:
    """Slide the layer over the image; data-parallel over window chunks.

    Chunk boundaries are fixed, shared inputs are read-only and every worker
    writes disjoint grid slices, so the result does not depend on `workers`.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    windows, (out_h, out_w) = sliding_windows(image, geom)
    kernels = _prepare(tiles, geom, dev, adc, lut)
    n = windows.shape[0]
    p_array = np.zeros((n, NUM_BITS))
    e_adc = np.zeros((n, NUM_BITS))
    output = np.zeros((n, geom.out_channels))

    spans = [(s, min(s + _CHUNK_WINDOWS, n)) for s in range(0, n, _CHUNK_WINDOWS)]

    def work(span):
        s0, s1 = span
        p, e, out, _ = _simulate_chunk(windows[s0:s1], kernels, dev, lut,
                                       geom.out_channels, keep_codes=False)
        p_array[s0:s1] = p
        e_adc[s0:s1] = e
        output[s0:s1] = out

    if workers == 1 or len(spans) == 1:
        for span in spans:
            work(span)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, spans))

    return RecordGrid(p_array.reshape(out_h, out_w, NUM_BITS),
                      e_adc.reshape(out_h, out_w, NUM_BITS),
                      output.reshape(out_h, out_w, geom.out_channels), geom)


def emit_trace(grid: RecordGrid, timing: PhaseTiming = PhaseTiming(),
               sample_rate: float = 1e9, noise_level: float = 0.0,
               seed: int = 0) -> PowerTrace:
    """Serialize a record grid into a sampled power waveform.

    Phases are rectangular: the ANALOG phase holds the recorded array power,
    the ADC phase holds energy/duration. Optional Gaussian sample noise with
    sigma = noise_level * max sample is applied after assembly.
    """
    n_analog = round(timing.analog_s * sample_rate)
    n_adc = round(timing.adc_s * sample_rate)
    if n_analog < 1 or n_adc < 1:
        raise ValueError("sample_rate too low for the phase durations")
    dt = 1.0 / sample_rate

    h, w = grid.shape
    per_bit = n_analog + n_adc
    samples = np.empty(h * w * NUM_BITS * per_bit)
    segments = []
    pos = 0
    for r in range(h):
        for c in range(w):
            for i in range(NUM_BITS):
                samples[pos:pos + n_analog] = grid.p_array[r, c, i]
                segments.append(TraceSegment(r, c, i, PHASE_ANALOG, pos, n_analog))
                pos += n_analog
                samples[pos:pos + n_adc] = grid.e_adc[r, c, i] / (n_adc * dt)
                segments.append(TraceSegment(r, c, i, PHASE_ADC, pos, n_adc))
                pos += n_adc

    if noise_level > 0.0:
        rng = np.random.default_rng(seed)
        samples = samples + rng.normal(0.0, noise_level * samples.max(), samples.shape)
    return PowerTrace(sample_rate, samples, segments)


def row_conductance_sums(tiles: list[ConductanceTile], geom: LayerGeometry) -> np.ndarray:
    """g_row[r]: total conductance hanging off flattened-kernel row r."""
    g_row = np.zeros(geom.kernel_rows)
    for t in tiles:
        g_row[t.row_offset:t.row_offset + t.rows] += t.conductances().sum(axis=1)
    return g_row


def ideal_adc_for(dev: DeviceConfig, rows: int, adc: SarAdcConfig | None = None) -> SarAdcConfig:
    """An ADC resolution high enough that the digital readback of a window
    recovers the integer convolution exactly after rounding.

    Worst-case reconstruction error is 255 * 17 code LSBs across the four
    columns and eight bits; the resolution is chosen to push that below half
    a unit of the integer dot product.
    """
    base = adc if adc is not None else SarAdcConfig()
    ratio = dev.g_max / dev.level_step
    need = 255 * 17 * ratio * rows / 0.45
    resolution = max(12, math.ceil(math.log2(need)))
    return SarAdcConfig(resolution=resolution, v_ref=base.v_ref, c_unit=base.c_unit,
                        full_scale_current=full_scale_for(dev, rows),
                        topology=base.topology)
