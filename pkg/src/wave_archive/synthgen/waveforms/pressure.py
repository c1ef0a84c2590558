import numpy as np
from scipy import signal

from .base_waveform import BaseWaveform


class PressureWaveform(BaseWaveform):
    """Pulsatile pressure around ``mean`` with peak-to-peak ``swing``."""

    def __init__(self, rate: int, mean: float, swing: float, noise_scale: float = 0.2):
        super().__init__(rate, noise_scale)
        self.mean = mean
        self.swing = swing

    def cycle(self, length: int) -> np.ndarray:
        t = np.linspace(0.0, 1.0, length, endpoint=False)
        pulse = signal.sawtooth(2 * np.pi * t, width=0.15)
        b, a = signal.butter(2, 0.3)
        smooth = signal.filtfilt(b, a, np.tile(-pulse, 3))[length:2 * length]
        smooth = (smooth - smooth.min()) / (smooth.max() - smooth.min())
        return self.mean + self.swing * (smooth - 0.5)

    def period_range(self) -> tuple[float, float]:
        return 0.35, 0.8
