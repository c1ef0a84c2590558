from abc import ABC, abstractmethod

import numpy as np

NotImplementedErrorMsg = "Subclasses must implement this method."


class BaseWaveform(ABC):
    """Periodic synthetic morphology sampled at a fixed rate, in the wave's physical unit."""

    def __init__(self, rate: int, noise_scale: float = 0.01):
        if rate < 1:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.noise_scale = noise_scale

    def generate(self, rng: np.random.Generator, n_samples: int, period_seconds: float) -> np.ndarray:
        """
        ``n_samples`` of the waveform with one cycle every ``period_seconds``,
        starting at a random phase, with white noise added.
        """
        if n_samples < 1:
            raise ValueError("n_samples must be positive")
        cycle = self.cycle(max(2, int(round(period_seconds * self.rate))))
        offset = int(rng.integers(0, cycle.size))
        values = np.resize(np.roll(cycle, -offset), n_samples)
        return values + rng.normal(0.0, self.noise_scale, n_samples)

    @abstractmethod
    def cycle(self, length: int) -> np.ndarray:
        """
        One cycle of the morphology, ``length`` samples long.
        """
        raise NotImplementedError(NotImplementedErrorMsg)

    @abstractmethod
    def period_range(self) -> tuple[float, float]:
        """
        Plausible cycle length in seconds, low and high.
        """
        raise NotImplementedError(NotImplementedErrorMsg)
