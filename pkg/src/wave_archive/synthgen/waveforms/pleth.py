import numpy as np
from scipy import signal

from .base_waveform import BaseWaveform


class PlethWaveform(BaseWaveform):
    """Systolic upstroke with a dicrotic bump, scaled to [0, 1]."""

    def cycle(self, length: int) -> np.ndarray:
        systolic = signal.windows.gaussian(length, max(length * 0.10, 0.5))
        dicrotic = signal.windows.gaussian(length, max(length * 0.07, 0.5))
        wave = np.roll(systolic, -int(0.25 * length)) + 0.35 * np.roll(dicrotic, int(0.05 * length))
        return (wave - wave.min()) / (wave.max() - wave.min())

    def period_range(self) -> tuple[float, float]:
        return 0.35, 0.8
