import numpy as np
from scipy import signal

from .base_waveform import BaseWaveform


class RespWaveform(BaseWaveform):
    """Impedance breathing curve: a smoothed asymmetric triangle."""

    def cycle(self, length: int) -> np.ndarray:
        t = np.linspace(0.0, 1.0, length, endpoint=False)
        raw = signal.sawtooth(2 * np.pi * t, width=0.4)
        b, a = signal.butter(2, 0.2)
        tiled = np.tile(raw, 3)
        return signal.filtfilt(b, a, tiled)[length:2 * length]

    def period_range(self) -> tuple[float, float]:
        return 1.5, 4.0
