"""Behavioral charge-redistribution SAR ADC: conversion and switching energy.

The DAC is a binary-weighted capacitor array (C_n = 2^(N-n) unit caps for
step n, plus a terminating unit cap). Conversion runs MSB-first; a rejected
capacitor returns to ground merged with the next trial, so the top-plate
step is +/- V_ref*C_n/C_total depending on the previous decision. The n-th
switching event draws

    n = 1:  E = -C_1 * V_ref * (dV_x - V_ref)
    n > 1:  E = -V_ref * (dV_x * sum_{i<n} C_i*D_i + C_n * (dV_x - V_ref))

from the reference. A single-ended array makes this total monotone
non-increasing in the output code; the default topology is pseudo
differential (a complementary array switching the inverted bit pattern,
each event costed by the same two-case formula), which reproduces the
sawtooth-with-trend code dependency of real converters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .device import DeviceConfig

TOPOLOGY_DIFFERENTIAL = "differential"
TOPOLOGY_SINGLE_ENDED = "single_ended"
_TOPOLOGIES = (TOPOLOGY_DIFFERENTIAL, TOPOLOGY_SINGLE_ENDED)


@dataclass(frozen=True)
class SarAdcConfig:
    """Capacitor-array parameters and the code scale for bit-line currents.

    full_scale_current may be left None and calibrated later against the
    worst-case column current of a given tile (see with_full_scale).
    """

    resolution: int = 8
    v_ref: float = 1.0
    c_unit: float = 1e-15
    full_scale_current: float | None = None
    topology: str = TOPOLOGY_DIFFERENTIAL

    def __post_init__(self) -> None:
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        if self.v_ref <= 0.0:
            raise ValueError("v_ref must be > 0")
        if self.c_unit <= 0.0:
            raise ValueError("c_unit must be > 0")
        if self.full_scale_current is not None and self.full_scale_current <= 0.0:
            raise ValueError("full_scale_current must be > 0")
        if self.topology not in _TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")

    @property
    def num_codes(self) -> int:
        return 2 ** self.resolution

    def capacitor(self, n: int) -> float:
        """C_n in farads for step n (1-based, MSB first)."""
        if not 1 <= n <= self.resolution:
            raise ValueError(f"step {n} outside [1, {self.resolution}]")
        return float(2 ** (self.resolution - n)) * self.c_unit

    @property
    def total_capacitance(self) -> float:
        """Binary array plus terminating cap: 2^N unit capacitors."""
        return float(self.num_codes) * self.c_unit

    def with_full_scale(self, dev: DeviceConfig, rows: int) -> "SarAdcConfig":
        """Calibrate the code scale to the worst-case current of `rows` devices."""
        return replace(self, full_scale_current=full_scale_for(dev, rows))


def full_scale_for(dev: DeviceConfig, rows: int) -> float:
    """Worst-case bit-line current: every row device at g_max and driven."""
    if rows < 1:
        raise ValueError("rows must be >= 1")
    return dev.v_read * dev.g_max * rows


@dataclass(frozen=True)
class DacState:
    """DAC state entering one SAR step: decided bits and top-plate voltage.

    delta_vx normally derives from the previous decision; passing it
    explicitly allows costing hypothetical switching events.
    """

    prior_bits: tuple[int, ...] = ()
    v_x: float = 0.0
    delta_vx: float | None = None


def _delta_vx(n: int, prior_bits: tuple[int, ...], cfg: SarAdcConfig) -> float:
    """Top-plate swing of step n's merged switching event."""
    weight = float(2 ** (cfg.resolution - n)) / float(cfg.num_codes)
    if n == 1 or prior_bits[n - 2]:
        return cfg.v_ref * weight
    return -cfg.v_ref * weight


def step_energy(n: int, state: DacState, cfg: SarAdcConfig) -> float:
    """Energy drawn from V_ref by the n-th switching event (joules)."""
    if not 1 <= n <= cfg.resolution:
        raise ValueError(f"step {n} outside [1, {cfg.resolution}]")
    if len(state.prior_bits) != n - 1:
        raise ValueError(f"step {n} needs {n - 1} prior bits, got {len(state.prior_bits)}")
    dv = state.delta_vx if state.delta_vx is not None else _delta_vx(n, state.prior_bits, cfg)
    if n == 1:
        return -cfg.capacitor(1) * cfg.v_ref * (dv - cfg.v_ref)
    held = sum(cfg.capacitor(i + 1) for i, d in enumerate(state.prior_bits) if d)
    return -cfg.v_ref * (dv * held + cfg.capacitor(n) * (dv - cfg.v_ref))


def _decide_bits(v_in: float, cfg: SarAdcConfig) -> list[int]:
    """MSB-first comparator decisions; ties resolve to 1.

    Thresholds compare v_in * 2^N against integer capacitor weights times
    v_ref, which keeps the staircase exact at code boundaries.
    """
    lhs = v_in * float(cfg.num_codes)
    bits = []
    acc = 0
    for n in range(1, cfg.resolution + 1):
        w = 2 ** (cfg.resolution - n)
        if lhs >= float(acc + w) * cfg.v_ref:
            bits.append(1)
            acc += w
        else:
            bits.append(0)
    return bits


def trajectory_states(bits: list[int], v_sampled: float, cfg: SarAdcConfig) -> list[DacState]:
    """DacStates entering each step of a conversion following `bits`.

    v_sampled is the input held on the array; the top plate starts at
    -v_sampled and lands on each trial level in turn.
    """
    states = []
    vx = -v_sampled
    prior: tuple[int, ...] = ()
    for n in range(1, cfg.resolution + 1):
        states.append(DacState(prior_bits=prior, v_x=vx))
        vx += _delta_vx(n, prior, cfg)
        prior = prior + (bits[n - 1],)
    return states


def conversion_step_energies(v_in: float, cfg: SarAdcConfig) -> tuple[int, list[int], list[float]]:
    """Convert v_in; return (code, bits, per-step energies) for cfg.topology.

    Differential steps cost the main array event plus the complementary
    array's mirrored event (inverted bit pattern, same two-case formula).
    """
    if v_in < 0.0:
        raise ValueError("v_in must be >= 0")
    bits = _decide_bits(v_in, cfg)
    code = 0
    for b in bits:
        code = (code << 1) | b
    energies = [step_energy(n, st, cfg)
                for n, st in enumerate(trajectory_states(bits, v_in, cfg), start=1)]
    if cfg.topology == TOPOLOGY_DIFFERENTIAL:
        comp = [1 - b for b in bits]
        comp_states = trajectory_states(comp, cfg.v_ref - v_in, cfg)
        for n, st in enumerate(comp_states, start=1):
            energies[n - 1] += step_energy(n, st, cfg)
    return code, bits, energies


def sar_convert(v_in: float, cfg: SarAdcConfig) -> int:
    """Successive-approximation conversion: clamp(floor(v_in/v_ref * 2^N)).

    Inputs at or above v_ref saturate at full code; negative inputs are a
    domain error.
    """
    if v_in < 0.0:
        raise ValueError("v_in must be >= 0")
    bits = _decide_bits(v_in, cfg)
    code = 0
    for b in bits:
        code = (code << 1) | b
    return code


@dataclass(frozen=True)
class AdcEnergyLut:
    """Per-output-code total conversion energy for one SarAdcConfig."""

    energies: np.ndarray     # float64 [2^N], joules
    config: SarAdcConfig

    def __post_init__(self) -> None:
        e = np.asarray(self.energies, dtype=np.float64)
        if e.shape != (self.config.num_codes,):
            raise ValueError("LUT length must be 2^resolution")
        object.__setattr__(self, "energies", e)

    def __getitem__(self, code) -> float:
        return self.energies[code]

    def normalized(self) -> np.ndarray:
        return self.energies / self.energies.max()

    def to_csv(self, path) -> None:
        norm = self.normalized()
        with open(path, "w") as f:
            f.write("code,energy_joules,energy_normalized\n")
            for code, (e, ne) in enumerate(zip(self.energies, norm)):
                f.write(f"{code},{float(e)!r},{float(ne)!r}\n")


def build_energy_lut(cfg: SarAdcConfig) -> AdcEnergyLut:
    """Total switching energy for each output code.

    Each code's nominal mid-tread voltage (D + 0.5) * v_ref / 2^N is
    converted and the step energies summed; the result is a pure function
    of the configuration (step energies do not depend on the sampled input).
    """
    energies = np.zeros(cfg.num_codes, dtype=np.float64)
    for target in range(cfg.num_codes):
        v_mid = (target + 0.5) * cfg.v_ref / cfg.num_codes
        code, _, steps = conversion_step_energies(v_mid, cfg)
        if code != target:
            raise RuntimeError(f"mid-tread voltage of code {target} converted to {code}")
        energies[target] = sum(steps)
    return AdcEnergyLut(energies, cfg)


def codes_from_currents(currents: np.ndarray, cfg: SarAdcConfig) -> np.ndarray:
    """Vectorized bit-line current to output code: clamp(floor(i/fs * 2^N))."""
    if cfg.full_scale_current is None:
        raise ValueError("full_scale_current is not set; calibrate with with_full_scale")
    i = np.asarray(currents, dtype=np.float64)
    if np.any(i < 0.0):
        raise ValueError("bit-line current must be >= 0")
    x = np.floor(i / cfg.full_scale_current * cfg.num_codes)
    return np.clip(x, 0, cfg.num_codes - 1).astype(np.int64)


def current_to_code(i_bitline: float, cfg: SarAdcConfig) -> int:
    """Scalar form of codes_from_currents."""
    return int(codes_from_currents(np.asarray([i_bitline]), cfg)[0])
