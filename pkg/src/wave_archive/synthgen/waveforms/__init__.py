"""Synthetic waveform morphologies keyed by wave kind."""

from typing import Dict, Tuple

from ...extract.waves import WaveKind
from .base_waveform import BaseWaveform
from .ecg import EcgWaveform
from .pleth import PlethWaveform
from .pressure import PressureWaveform
from .resp import RespWaveform

# symbol -> (mean, peak-to-peak swing)
_PRESSURE_LEVELS: Dict[str, Tuple[float, float]] = {
    "ABP": (70.0, 40.0),
    "ART": (70.0, 40.0),
    "UAP": (50.0, 30.0),
    "PAP": (20.0, 12.0),
    "CVP": (8.0, 6.0),
    "RAP": (6.0, 5.0),
    "LAP": (10.0, 6.0),
    "UVP": (8.0, 4.0),
    "ICP": (10.0, 6.0),
    "CO2": (20.0, 38.0),
    "O2": (150.0, 20.0),
    "AWF": (0.0, 20.0),
    "AGT": (2.0, 0.6),
    "SEV": (2.0, 0.6),
}


def waveform_for(wave: WaveKind) -> BaseWaveform:
    if wave.unit == "mV":
        return EcgWaveform(wave.rate)
    if wave.unit == "N/A":
        return PlethWaveform(wave.rate)
    if wave.unit == "Ohm":
        return RespWaveform(wave.rate)
    mean, swing = _PRESSURE_LEVELS.get(wave.symbol, (40.0, 20.0))
    return PressureWaveform(wave.rate, mean=mean, swing=swing, noise_scale=swing / 100.0)


__all__ = [
    'BaseWaveform',
    'EcgWaveform',
    'PlethWaveform',
    'PressureWaveform',
    'RespWaveform',
    'waveform_for',
]
