from .adt import StayInterval, StaySource, sanitize_adt, stays_to_events, visit_to_mrn
from .bed_labels import BedLabelMap, normalize_bed_label
from .matcher import (
    LinkageMethod,
    LinkageReport,
    LinkageResult,
    LinkageSegment,
    PendingPiece,
    assign_pass1_device_logs,
    assign_pass2_adt,
    audit_entries,
    link_day,
)
from .streams import StreamRange, bundle_stream_ranges, collapse_stream_ranges

__all__ = [
    'BedLabelMap',
    'LinkageMethod',
    'LinkageReport',
    'LinkageResult',
    'LinkageSegment',
    'PendingPiece',
    'StayInterval',
    'StaySource',
    'StreamRange',
    'assign_pass1_device_logs',
    'assign_pass2_adt',
    'audit_entries',
    'bundle_stream_ranges',
    'collapse_stream_ranges',
    'link_day',
    'normalize_bed_label',
    'sanitize_adt',
    'stays_to_events',
    'visit_to_mrn',
]
