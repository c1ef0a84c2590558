from .runner import (
    ArchiveLayout,
    ArchivePipeline,
    DayOutcome,
    RangeSummary,
    archive_digest,
    run_day,
    run_range,
)
from .state import PHASES, DayRunState, Phase
from .workers import run_parallel

__all__ = [
    'ArchiveLayout',
    'ArchivePipeline',
    'DayOutcome',
    'DayRunState',
    'PHASES',
    'Phase',
    'RangeSummary',
    'archive_digest',
    'run_day',
    'run_parallel',
    'run_range',
]
