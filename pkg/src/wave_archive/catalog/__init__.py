from .publisher import CatalogEntry, detail_rows, publish_day
from .query import IntegrityReport, StudyFilter, check_integrity, query_frame, query_studies
from .stats import AGE_GROUPS, ArchiveStats, age_group, summarize
from .tables import (
    CATALOG_TABLES,
    STUDY_DETAILS,
    STUDY_MAP,
    UNASSIGNED_UNIT,
    WAVEFORM_MANIFEST,
    BedUnitMap,
    CatalogKind,
    StudyDetailRow,
    StudyMapRow,
    WaveformManifestRow,
    read_table,
)

__all__ = [
    'AGE_GROUPS',
    'ArchiveStats',
    'BedUnitMap',
    'CATALOG_TABLES',
    'CatalogEntry',
    'CatalogKind',
    'IntegrityReport',
    'STUDY_DETAILS',
    'STUDY_MAP',
    'StudyDetailRow',
    'StudyFilter',
    'StudyMapRow',
    'UNASSIGNED_UNIT',
    'WAVEFORM_MANIFEST',
    'WaveformManifestRow',
    'age_group',
    'check_integrity',
    'detail_rows',
    'publish_day',
    'query_frame',
    'query_studies',
    'read_table',
    'summarize',
]
