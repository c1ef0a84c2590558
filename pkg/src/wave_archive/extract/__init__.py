from .bundle import bundle_from_rows, parse_extract_day, validate_row_counts
from .manifest import VerifiedBundle, build_manifest, parse_manifest, verify_bundle, write_manifest
from .schema import (
    AdtEvent,
    AdtEventKind,
    AlertRecord,
    CountReport,
    DeviceLogRecord,
    ExtractBundle,
    ManifestEntry,
    MonitorPatientStream,
    NumericRecord,
    WaveSampleRecord,
)
from .waves import WAVE_REGISTRY, WaveKind, lookup_wave

__all__ = [
    'AdtEvent',
    'AdtEventKind',
    'AlertRecord',
    'CountReport',
    'DeviceLogRecord',
    'ExtractBundle',
    'ManifestEntry',
    'MonitorPatientStream',
    'NumericRecord',
    'VerifiedBundle',
    'WAVE_REGISTRY',
    'WaveKind',
    'WaveSampleRecord',
    'build_manifest',
    'bundle_from_rows',
    'lookup_wave',
    'parse_extract_day',
    'parse_manifest',
    'validate_row_counts',
    'verify_bundle',
    'write_manifest',
]
