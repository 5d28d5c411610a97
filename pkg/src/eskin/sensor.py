"""Piezoresistive taxel, readout amplifier, and ADC models.

The crossbar places all enabled taxels of one column in parallel in the
amplifier's feedback path, so a single pressed taxel (kilo-ohms) dominates
a column of unpressed ones (giga-ohms). The measurable signal is the
amplifier output minus its reference baseline, clamped to the ADC input
range: unpressed columns read near zero, pressed ones saturate.
"""

from dataclasses import dataclass

import numpy as np

GRID_ROWS = 16
GRID_COLS = 16
N_TAXELS = GRID_ROWS * GRID_COLS


@dataclass(frozen=True)
class TaxelModel:
    """Inverse pressure-resistance law, clamped to [r_min, r_off]."""

    r_min: float = 3e3       # ohms at full press
    r_off: float = 1e9       # ohms unpressed
    p_ref: float = 500.0     # kPa at which resistance reaches r_min

    def __post_init__(self):
        if not (0 < self.r_min < self.r_off):
            raise ValueError("require 0 < r_min < r_off")
        if self.p_ref <= 0:
            raise ValueError("p_ref must be positive")


@dataclass(frozen=True)
class FrontEndConfig:
    """Feedback amplifier and ADC parameters."""

    v_ref: float = 2.5
    r_f: float = 100e3
    adc_bits: int = 12
    adc_full_scale: float = 2.5
    noise_sigma: float = 0.0  # additive Gaussian noise on the voltage, volts

    def __post_init__(self):
        if self.v_ref <= 0 or self.r_f <= 0 or self.adc_full_scale <= 0:
            raise ValueError("v_ref, r_f, adc_full_scale must be positive")
        if not 1 <= self.adc_bits <= 16:
            raise ValueError("adc_bits must be in [1, 16]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def adc_max_code(self) -> int:
        return (1 << self.adc_bits) - 1


def validate_pressure_field(field: np.ndarray) -> np.ndarray:
    """Check a pressure grid: 16x16, finite, non-negative kPa."""
    field = np.asarray(field, dtype=np.float64)
    if field.shape != (GRID_ROWS, GRID_COLS):
        raise ValueError(f"pressure field must be {GRID_ROWS}x{GRID_COLS}, got {field.shape}")
    if not np.all(np.isfinite(field)) or np.any(field < 0):
        raise ValueError("pressure values must be finite and non-negative")
    return field


def pressure_to_resistance(p, model: TaxelModel = TaxelModel()):
    """Taxel resistance in ohms for pressure p (kPa). Vectorized over p."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("pressure must be non-negative")
    with np.errstate(divide="ignore"):
        r = np.where(p > 0, model.r_min * model.p_ref / np.maximum(p, 1e-300), model.r_off)
    out = np.clip(r, model.r_min, model.r_off)
    return float(out) if out.ndim == 0 else out


def parallel_resistance(resistances) -> float:
    """Equivalent resistance of parallel elements: 1 / sum(1/R_i)."""
    r = np.asarray(resistances, dtype=np.float64)
    if r.size == 0:
        raise ValueError("parallel_resistance requires at least one element")
    if np.any(r <= 0):
        raise ValueError("resistances must be positive")
    return float(1.0 / np.sum(1.0 / r))


def readout_voltage(r_s: float, cfg: FrontEndConfig = FrontEndConfig()) -> float:
    """Baseline-subtracted amplifier output V_ref*R_f/R_s, clamped to the ADC range."""
    if r_s <= 0:
        raise ValueError("sensing resistance must be positive")
    v = cfg.v_ref * cfg.r_f / r_s
    return float(min(max(v, 0.0), cfg.adc_full_scale))


def adc_sample(v: float, cfg: FrontEndConfig = FrontEndConfig()) -> int:
    """Quantize a voltage to an ADC code; overrange clamps to the end codes."""
    if v < 0:
        v = 0.0
    code = np.round(v / cfg.adc_full_scale * cfg.adc_max_code)
    return int(min(max(code, 0), cfg.adc_max_code))


def column_group_read(
    field: np.ndarray,
    enabled_rows,
    col: int,
    model: TaxelModel = TaxelModel(),
    cfg: FrontEndConfig = FrontEndConfig(),
    rng: np.random.Generator | None = None,
) -> int:
    """Read the parallel network of the enabled taxels in one column.

    Models exactly one scan of the shared ADC. ``rng`` supplies voltage
    noise when cfg.noise_sigma > 0; exact-value tests leave it unset.
    """
    rows = sorted(set(int(r) for r in enabled_rows))
    if not rows:
        raise ValueError("enabled row set must be non-empty")
    if any(r < 0 or r >= field.shape[0] for r in rows) or not 0 <= col < field.shape[1]:
        raise ValueError("row/column index out of range")
    r_taxels = pressure_to_resistance(field[rows, col], model)
    r_eq = parallel_resistance(np.atleast_1d(r_taxels))
    v = readout_voltage(r_eq, cfg)
    if cfg.noise_sigma > 0 and rng is not None:
        v = min(max(v + rng.normal(0.0, cfg.noise_sigma), 0.0), cfg.adc_full_scale)
    return adc_sample(v, cfg)


def unpressed_column_code(n_rows: int, model: TaxelModel, cfg: FrontEndConfig) -> int:
    """ADC code of a column with n_rows unpressed taxels in parallel."""
    r_eq = model.r_off / n_rows
    return adc_sample(readout_voltage(r_eq, cfg), cfg)
