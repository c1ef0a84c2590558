"""Cross-cutting helpers: configuration, logging, errors, hashing and time."""

from .config import PipelineConfig, load_config, validate_config
from .logger import RunLogger

__all__ = [
    'PipelineConfig',
    'RunLogger',
    'load_config',
    'validate_config',
]
