"""Physical units <-> 16-bit ADC units."""

import math
from dataclasses import dataclass

import numpy as np

from ..utils.errors import NoFiniteSamples

INVALID = -32768
ADC_LIMIT = 32000
TARGET_SPAN = 60000.0
CONSTANT_GAIN = 200.0
GAIN_DIGITS = 6


@dataclass(frozen=True)
class Quantization:
    gain: float
    baseline: int

    @property
    def gain_text(self) -> str:
        return format_gain(self.gain)

    @property
    def max_error(self) -> float:
        return 0.5 / self.gain


def format_gain(gain: float) -> str:
    return f"{gain:.{GAIN_DIGITS}g}"


def _round_down(value: float, digits: int) -> float:
    exponent = math.floor(math.log10(value))
    scale = 10.0 ** (digits - 1 - exponent)
    return float(format_gain(math.floor(value * scale) / scale))


def choose_quantization(samples: np.ndarray) -> Quantization:
    """
    Gain and baseline mapping [min, max] of the finite samples onto
    [-30000, 30000]. The gain keeps 6 significant digits (rounded down) so
    the header text reproduces it exactly.
    """
    values = np.asarray(samples, dtype=np.float64)
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        raise NoFiniteSamples("no finite samples to quantize")

    lo, hi = float(finite.min()), float(finite.max())
    if hi == lo:
        return Quantization(gain=CONSTANT_GAIN, baseline=-int(round(lo * CONSTANT_GAIN)))

    gain = _round_down(TARGET_SPAN / (hi - lo), GAIN_DIGITS)
    mid = (hi + lo) / 2.0
    return Quantization(gain=gain, baseline=int(round(-mid * gain)))


def record_quantization(samples: np.ndarray) -> Quantization:
    """Quantization for a stored record; a record with no finite sample is all INVALID under gain 200."""
    values = np.asarray(samples, dtype=np.float64)
    if not np.isfinite(values).any():
        return Quantization(gain=CONSTANT_GAIN, baseline=0)
    return choose_quantization(values)


def quantize(samples: np.ndarray, q: Quantization) -> np.ndarray:
    """ADC values as int16; NaN becomes INVALID."""
    values = np.asarray(samples, dtype=np.float64)
    finite = np.isfinite(values)
    adu = np.full(values.shape, INVALID, dtype=np.int16)
    scaled = np.rint(values[finite] * q.gain + q.baseline)
    adu[finite] = np.clip(scaled, -ADC_LIMIT, ADC_LIMIT).astype(np.int16)
    return adu


def dequantize(adu: np.ndarray, q: Quantization) -> np.ndarray:
    """Physical values; INVALID becomes NaN."""
    digital = np.asarray(adu, dtype=np.int64)
    physical = (digital - q.baseline) / q.gain
    physical[digital == INVALID] = np.nan
    return physical


def checksum16(adu: np.ndarray) -> int:
    """Sum of all stored samples as a signed 16-bit integer."""
    total = int(np.asarray(adu, dtype=np.int64).sum())
    return ((total + 32768) % 65536) - 32768
