import numpy as np
from scipy import signal

from .base_waveform import BaseWaveform

# (position within the beat, width as a fraction of the beat, amplitude in mV)
_PQRST = [
    (0.20, 0.040, 0.12),
    (0.34, 0.010, -0.10),
    (0.37, 0.016, 1.10),
    (0.40, 0.012, -0.25),
    (0.65, 0.060, 0.30),
]


class EcgWaveform(BaseWaveform):
    def cycle(self, length: int) -> np.ndarray:
        beat = np.zeros(length)
        for position, width, amplitude in _PQRST:
            std = max(width * length / 2.0, 0.5)
            window = signal.windows.gaussian(length, std)
            beat += amplitude * np.roll(window, int(position * length) - length // 2)
        return beat

    def period_range(self) -> tuple[float, float]:
        return 0.35, 0.8
