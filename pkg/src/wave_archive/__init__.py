"""Archive pipeline for bedside-monitor waveform extracts."""

__version__ = "0.1.0"
