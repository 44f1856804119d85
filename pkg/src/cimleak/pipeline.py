"""Adversary-side preprocessing: trace segmentation, bit-significance
weighted sums, power feature matrices, 8-bit normalization and noise
injection / emulation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .sim import NUM_BITS, PHASE_ADC, PHASE_ANALOG, PowerTrace, RecordGrid
from .tensorio import FormatError

log = logging.getLogger(__name__)

NOISE_ON_FEATURES = "feature_matrices"
NOISE_ON_TRACE = "trace_samples"


@dataclass(frozen=True)
class NoiseConfig:
    """Injected measurement noise: sigma = level * max of the target signal."""

    level: float
    seed: int = 0
    target: str = NOISE_ON_FEATURES

    def __post_init__(self) -> None:
        if self.level < 0.0:
            raise ValueError("noise level must be >= 0")
        if self.target not in (NOISE_ON_FEATURES, NOISE_ON_TRACE):
            raise ValueError(f"unknown noise target {self.target!r}")


@dataclass
class SegmentedTrace:
    """Per-(window, bit) phase measurements recovered from a power trace."""

    p_array: np.ndarray   # [H, W, 8] mean ANALOG power
    e_adc: np.ndarray     # [H, W, 8] integrated ADC energy


@dataclass
class PowerFeatureMatrices:
    """Paired array-power and ADC-energy matrices over the output feature map."""

    array_pf: np.ndarray
    adc_pf: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.array_pf.shape != self.adc_pf.shape:
            raise ValueError("feature matrices must share one shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.array_pf.shape


def segment_trace(trace: PowerTrace) -> SegmentedTrace:
    """Break a trace into per-bit phases using its segment markers.

    Mean power over each ANALOG segment and integrated energy over each ADC
    segment; with a noiseless trace this reproduces the simulator's records
    to float precision. Inconsistent or truncated markers raise FormatError.
    """
    if not trace.segments:
        raise FormatError("trace has no segment markers")
    n = len(trace.samples)
    rows = max(s.row for s in trace.segments) + 1
    cols = max(s.col for s in trace.segments) + 1
    dt = 1.0 / trace.sample_rate

    p_array = np.full((rows, cols, NUM_BITS), np.nan)
    e_adc = np.full((rows, cols, NUM_BITS), np.nan)
    for seg in trace.segments:
        if seg.start < 0 or seg.count < 1 or seg.start + seg.count > n:
            raise FormatError(f"segment {seg} exceeds the {n}-sample trace")
        if not 0 <= seg.bit < NUM_BITS:
            raise FormatError(f"segment {seg} has an invalid bit index")
        chunk = trace.samples[seg.start:seg.start + seg.count]
        if seg.phase == PHASE_ANALOG:
            if not np.isnan(p_array[seg.row, seg.col, seg.bit]):
                raise FormatError(f"duplicate ANALOG segment at {(seg.row, seg.col, seg.bit)}")
            p_array[seg.row, seg.col, seg.bit] = chunk.mean()
        elif seg.phase == PHASE_ADC:
            if not np.isnan(e_adc[seg.row, seg.col, seg.bit]):
                raise FormatError(f"duplicate ADC segment at {(seg.row, seg.col, seg.bit)}")
            e_adc[seg.row, seg.col, seg.bit] = chunk.sum() * dt
        else:
            raise FormatError(f"unknown phase tag {seg.phase!r}")
    if np.isnan(p_array).any() or np.isnan(e_adc).any():
        raise FormatError("trace does not cover every (window, bit, phase)")
    return SegmentedTrace(p_array, e_adc)


def weighted_sum(per_bit) -> float:
    """Bit-significance weighted sum: sum_i v[i] * 2^i over exactly 8 values."""
    values = list(per_bit)
    if len(values) != NUM_BITS:
        raise ValueError(f"weighted_sum needs exactly {NUM_BITS} values, got {len(values)}")
    total = 0.0
    for i, v in enumerate(values):
        total += float(v) * float(1 << i)
    return total


def weighted_sum_planes(stack: np.ndarray) -> np.ndarray:
    """Vectorized weighted_sum over the trailing bit axis, same summation order."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.shape[-1] != NUM_BITS:
        raise ValueError(f"trailing axis must have {NUM_BITS} entries")
    acc = np.zeros(stack.shape[:-1])
    for i in range(NUM_BITS):
        acc += stack[..., i] * float(1 << i)
    return acc


def assemble_features(source: RecordGrid | SegmentedTrace) -> PowerFeatureMatrices:
    """Populate the two power feature matrices from complete records.

    Entry (i, j) is the weighted sum for the window centred on output
    position (i, j); both matrices share the output-feature-map shape.
    """
    if isinstance(source, RecordGrid):
        p, e = source.p_array, source.e_adc
    elif isinstance(source, SegmentedTrace):
        p, e = source.p_array, source.e_adc
    else:
        raise TypeError("expected a RecordGrid or SegmentedTrace")
    if p.shape != e.shape or p.ndim != 3:
        raise ValueError("record arrays must be [H, W, 8] pairs")
    return PowerFeatureMatrices(weighted_sum_planes(p), weighted_sum_planes(e))


def normalize_8bit(pf: np.ndarray) -> tuple[np.ndarray, dict]:
    """Affine map of [min, max] onto [0, 255] with floor rounding.

    A constant matrix degenerates to zeros (warned, not fatal). The returned
    metadata allows replaying the exact transform.
    """
    pf = np.asarray(pf, dtype=np.float64)
    lo, hi = float(pf.min()), float(pf.max())
    meta = {"min": lo, "max": hi}
    if hi <= lo:
        log.warning("constant feature matrix: normalizing to zeros")
        meta["constant"] = True
        return np.zeros(pf.shape, dtype=np.uint8), meta
    scaled = np.floor((pf - lo) / (hi - lo) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8), meta


def denormalize_8bit(data: np.ndarray, meta: dict) -> np.ndarray:
    """Approximate inverse of normalize_8bit (within one quantization step)."""
    if meta.get("constant"):
        return np.full(data.shape, meta["min"])
    lo, hi = meta["min"], meta["max"]
    return data.astype(np.float64) / 255.0 * (hi - lo) + lo


def inject_noise(pf: PowerFeatureMatrices, noise: NoiseConfig) -> PowerFeatureMatrices:
    """Add i.i.d. Gaussian noise, sigma = level * max, each matrix using its
    own maximum. Seeded and reproducible; the array matrix draws first."""
    if noise.level == 0.0:
        return PowerFeatureMatrices(pf.array_pf.copy(), pf.adc_pf.copy(), dict(pf.meta))
    rng = np.random.default_rng(noise.seed)
    sig_a = noise.level * float(pf.array_pf.max())
    sig_d = noise.level * float(pf.adc_pf.max())
    noisy_a = pf.array_pf + rng.normal(0.0, sig_a, pf.array_pf.shape)
    noisy_d = pf.adc_pf + rng.normal(0.0, sig_d, pf.adc_pf.shape)
    meta = dict(pf.meta)
    meta["noise_level"] = noise.level
    meta["noise_seed"] = noise.seed
    return PowerFeatureMatrices(noisy_a, noisy_d, meta)


def add_trace_noise(trace: PowerTrace, noise: NoiseConfig) -> PowerTrace:
    """Gaussian sample noise on a raw trace (sigma relative to peak power)."""
    rng = np.random.default_rng(noise.seed)
    sigma = noise.level * float(trace.samples.max())
    samples = trace.samples + rng.normal(0.0, sigma, trace.samples.shape)
    return PowerTrace(trace.sample_rate, samples, list(trace.segments))
