"""cimleak: behavioral RRAM compute-in-memory accelerator with input-dependent
power leakage, plus the adversary's trace-to-feature preprocessing chain."""

from .adc import (AdcEnergyLut, DacState, SarAdcConfig, build_energy_lut,
                  current_to_code, sar_convert, step_energy)
from .dataset import AttackSample, PipelineConfig, export_pairs, ingest_images
from .device import (ConductanceTile, DeviceConfig, LayerGeometry,
                     level_to_conductance, map_weights, quantize_weights,
                     reconstruct_weights)
from .pipeline import (NoiseConfig, PowerFeatureMatrices, assemble_features,
                       inject_noise, normalize_8bit, segment_trace, weighted_sum)
from .sim import (BitSerialInput, ExecRecord, PhaseTiming, PowerTrace,
                  RecordGrid, adc_phase, array_bit_power, emit_trace,
                  ideal_adc_for, run_layer, run_window)
from .tensorio import FormatError, read_tensor, read_trace, write_tensor, write_trace

__version__ = "0.1.0"
