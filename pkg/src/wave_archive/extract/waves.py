"""Registry of waveform kinds: symbol, unit and sampling rate per wave label."""

from dataclasses import dataclass
from typing import Dict, List

from ..utils.errors import UnknownWaveSymbol


@dataclass(frozen=True)
class WaveKind:
    symbol: str
    name: str
    unit: str
    rate: int


# (symbol, wave name, unit, samples per second)
_REGISTRY_ROWS = [
    ("AWF", "Airway Flow", "l/min", 125),
    ("O2", "Airway Oxygen", "mmHg", 125),
    ("ABP", "Arterial Blood Pressure", "mmHg", 125),
    ("ART", "Arterial Blood Pressure", "mmHg", 125),
    ("CO2", "(Airway Expired) Carbon Dioxide", "mmHg", 125),
    ("CVP", "Central Venous Pressure", "mmHg", 125),
    ("AGT", "Gas Analyzer Agent", "%", 125),
    ("SEV", "Gas Analyzer Sevoflurane", "%", 125),
    ("ICP", "Intra-Cranial Pressure", "mmHg", 125),
    ("aVR", "Lead aVR - ECG Wave Label", "mV", 500),
    ("I", "Lead I - ECG Wave Label", "mV", 500),
    ("II", "Lead II - ECG Wave Label", "mV", 500),
    ("III", "Lead III - ECG Wave Label", "mV", 500),
    ("V", "Lead V - ECG Wave Label", "mV", 500),
    ("LAP", "Left Arterial Pressure", "mmHg", 125),
    ("PLETHI", "Pleth Left Wave", "N/A", 125),
    ("PLTHpo", "Pleth Post Ductal", "N/A", 125),
    ("PLTHpr", "Pleth Pre Ductal", "N/A", 125),
    ("PLETHr", "Pleth Right Wave", "N/A", 125),
    ("Pleth", "Pleth Wave", "N/A", 125),
    ("PlethT", "Pleth wave from Telemetry", "N/A", 125),
    ("PAP", "Pulmonary Artery Pressure", "mmHg", 125),
    ("Resp", "Resp Wave (Impedance via ECG electrodes)", "Ohm", 63),
    ("RAP", "Right Arterial Pressure", "mmHg", 63),
    ("UAP", "Umbilical Arterial Pressure", "mmHg", 125),
    ("UVP", "Umbilical Venous Pressure", "mmHg", 125),
]

WAVE_REGISTRY: Dict[str, WaveKind] = {
    symbol: WaveKind(symbol=symbol, name=name, unit=unit, rate=rate)
    for symbol, name, unit, rate in _REGISTRY_ROWS
}


def lookup_wave(symbol: str) -> WaveKind:
    try:
        return WAVE_REGISTRY[symbol]
    except KeyError:
        raise UnknownWaveSymbol(f"unknown wave symbol {symbol!r}") from None


def registered_symbols() -> List[str]:
    return [row[0] for row in _REGISTRY_ROWS]
