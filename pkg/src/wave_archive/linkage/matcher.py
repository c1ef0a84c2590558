"""Two-pass MRN assignment for monitor streams missing a lifetime id."""

import logging
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from datetime import timedelta
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..extract.schema import DeviceLogRecord, ExtractBundle
from ..utils.errors import UnpairedEvent
from ..utils.utils import NS_PER_SECOND, format_ts, from_ns
from .adt import StayInterval, StaySource, sanitize_adt, visit_to_mrn
from .bed_labels import BedLabelMap
from .streams import DEFAULT_MAX_GAP, StreamRange, bundle_stream_ranges

logger = logging.getLogger(__name__)


class LinkageMethod(str, Enum):
    LIFETIME_ID = "lifetime_id"
    DEVICE_LOG = "device_log"
    ADT_OVERLAP = "adt_overlap"
    UNMATCHED = "unmatched"


@dataclass(frozen=True)
class LinkageSegment:
    start: pd.Timestamp
    end: pd.Timestamp
    bed_label: str
    device_bed_label: str
    assigned_mrn: Optional[str]
    method: LinkageMethod
    overlap_seconds: float = 0.0
    candidates: int = 0
    tie_broken: bool = False
    evidence_start: Optional[pd.Timestamp] = None
    evidence_end: Optional[pd.Timestamp] = None

    def __post_init__(self) -> None:
        if self.method is LinkageMethod.UNMATCHED and self.assigned_mrn is not None:
            raise ValueError("an unmatched segment carries no MRN")
        if self.method is not LinkageMethod.UNMATCHED and not self.assigned_mrn:
            raise ValueError(f"a {self.method.value} segment needs an MRN")

    @property
    def lifetime_id_source(self) -> bool:
        return self.method is LinkageMethod.LIFETIME_ID


@dataclass
class LinkageResult:
    monitor_patient_id: str
    segments: List[LinkageSegment] = field(default_factory=list)


@dataclass
class LinkageReport:
    total_streams: int = 0
    total_streams_missing_id: int = 0
    assigned: int = 0
    per_method: Dict[str, int] = field(default_factory=dict)
    tie_breaks: int = 0
    unpaired_stays: int = 0
    warnings: List[str] = field(default_factory=list)

    @property
    def coverage_fraction(self) -> float:
        if self.total_streams_missing_id == 0:
            return 1.0
        return self.assigned / self.total_streams_missing_id

    def to_dict(self) -> Dict[str, Any]:
        return {
            "total_streams": self.total_streams,
            "total_streams_missing_id": self.total_streams_missing_id,
            "assigned": self.assigned,
            "coverage_fraction": self.coverage_fraction,
            "per_method": dict(sorted(self.per_method.items())),
            "tie_breaks": self.tie_breaks,
            "unpaired_stays": self.unpaired_stays,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class PendingPiece:
    """Part of a stream without a lifetime id that no pass has claimed yet."""
    stream: StreamRange
    bed: str
    start: pd.Timestamp
    end: pd.Timestamp


def _assign(pieces: Sequence[PendingPiece], candidates: Sequence[StayInterval],
            method: LinkageMethod) -> Tuple[List[Tuple[PendingPiece, LinkageSegment]], List[PendingPiece]]:
    """
    Give each piece the MRN of the overlapping candidate on the same bed.

    Pieces are cut at candidate boundaries; within each cut the covering
    candidate with the largest overlap with the whole piece wins, then the
    earliest start, then the smallest MRN.
    """
    by_bed: Dict[str, List[StayInterval]] = defaultdict(list)
    for candidate in candidates:
        by_bed[candidate.bed].append(candidate)

    assigned: List[Tuple[PendingPiece, LinkageSegment]] = []
    leftover: List[PendingPiece] = []
    for piece in pieces:
        lo, hi = piece.start.value, piece.end.value
        scored = [(c.overlap_ns(piece.start, piece.end), c) for c in by_bed.get(piece.bed, [])]
        scored = [(ov, c) for ov, c in scored if ov > 0]
        if not scored:
            leftover.append(piece)
            continue
        scored.sort(key=lambda item: (-item[0], item[1].start, item[1].mrn))

        cuts = {lo, hi}
        for _, c in scored:
            cuts.update(t for t in (c.start.value, c.end.value) if lo < t < hi)
        edges = sorted(cuts)

        claimed: List[LinkageSegment] = []
        gaps: List[Tuple[int, int]] = []
        for a, b in zip(edges, edges[1:]):
            covering = [(ov, c) for ov, c in scored if c.start.value <= a and c.end.value >= b]
            if not covering:
                if gaps and gaps[-1][1] == a:
                    gaps[-1] = (gaps[-1][0], b)
                else:
                    gaps.append((a, b))
                continue
            best_overlap, winner = covering[0]
            tie = any(ov == best_overlap and c.mrn != winner.mrn for ov, c in covering[1:])
            if tie:
                logger.warning("equal overlap between candidate stays on bed %s; earliest start kept", piece.bed)
            segment = LinkageSegment(
                start=from_ns(a),
                end=from_ns(b),
                bed_label=piece.bed,
                device_bed_label=piece.stream.bed_label,
                assigned_mrn=winner.mrn,
                method=method,
                overlap_seconds=best_overlap / NS_PER_SECOND,
                candidates=len(scored),
                tie_broken=tie,
            )
            previous = claimed[-1] if claimed else None
            if previous is not None and previous.end == segment.start and previous.assigned_mrn == winner.mrn:
                claimed[-1] = replace(previous, end=segment.end,
                                      overlap_seconds=max(previous.overlap_seconds, segment.overlap_seconds),
                                      tie_broken=previous.tie_broken or tie)
            else:
                claimed.append(segment)

        assigned.extend((piece, segment) for segment in claimed)
        leftover.extend(
            PendingPiece(piece.stream, piece.bed, from_ns(a), from_ns(b))
            for a, b in gaps
        )
    return assigned, leftover


def device_log_stays(device_logs: Sequence[DeviceLogRecord], bed_map: BedLabelMap,
                     visit_mrns: Dict[str, str]) -> List[StayInterval]:
    """Device logs resolved to MRN through the encounter id, on EMR bed labels."""
    stays: List[StayInterval] = []
    unresolved = 0
    for log in device_logs:
        mrn = visit_mrns.get(log.encounter_id)
        if mrn is None:
            unresolved += 1
            continue
        stays.append(StayInterval(mrn=mrn, visit_id=log.encounter_id, bed=bed_map.normalize(log.bed_label),
                                  start=log.attach_at, end=log.detach_at, source=StaySource.DEVICE_LOG))
    if unresolved:
        logger.info("%d device log rows have no matching ADT visit", unresolved)
    return stays


def pending_pieces(streams: Sequence[StreamRange], bed_map: BedLabelMap) -> List[PendingPiece]:
    return [
        PendingPiece(stream, bed_map.normalize(stream.bed_label), stream.start, stream.end)
        for stream in streams
        if stream.missing_lifetime_id
    ]


def assign_pass1_device_logs(streams: Sequence[StreamRange], device_logs: Sequence[DeviceLogRecord],
                             bed_map: BedLabelMap, visit_mrns: Dict[str, str],
                             ) -> Tuple[List[Tuple[PendingPiece, LinkageSegment]], List[PendingPiece]]:
    """Assign MRNs from device attach/detach logs; returns (assigned, still pending)."""
    pieces = pending_pieces(streams, bed_map)
    return _assign(pieces, device_log_stays(device_logs, bed_map, visit_mrns), LinkageMethod.DEVICE_LOG)


def assign_pass2_adt(pending: Sequence[PendingPiece], stays: Sequence[StayInterval],
                     ) -> List[Tuple[PendingPiece, LinkageSegment]]:
    """Assign what pass 1 left from sanitized ADT stays; the rest is stored without an MRN."""
    assigned, leftover = _assign(pending, stays, LinkageMethod.ADT_OVERLAP)
    unmatched = [
        (piece, LinkageSegment(start=piece.start, end=piece.end, bed_label=piece.bed,
                               device_bed_label=piece.stream.bed_label, assigned_mrn=None,
                               method=LinkageMethod.UNMATCHED))
        for piece in leftover
    ]
    return assigned + unmatched


def _best_overlap(pool: Sequence[StayInterval], start: pd.Timestamp, end: pd.Timestamp) -> Optional[StayInterval]:
    scored = [(s.overlap_ns(start, end), s) for s in pool]
    scored = [(ov, s) for ov, s in scored if ov > 0]
    if not scored:
        return None
    return min(scored, key=lambda item: (-item[0], item[1].start))[1]


def _with_evidence(segment: LinkageSegment, stays: Dict[Tuple[str, str], List[StayInterval]],
                   logs: Dict[Tuple[str, str], List[StayInterval]]) -> LinkageSegment:
    """Attach the EMR interval the study should clamp to: ADT stay first, then device log."""
    if segment.assigned_mrn is None:
        return segment
    key = (segment.assigned_mrn, segment.bed_label)
    evidence = _best_overlap(stays.get(key, []), segment.start, segment.end)
    if evidence is None:
        evidence = _best_overlap(logs.get(key, []), segment.start, segment.end)
    if evidence is None:
        return segment
    return replace(segment, evidence_start=evidence.start, evidence_end=evidence.end)


def _index(stays: Sequence[StayInterval]) -> Dict[Tuple[str, str], List[StayInterval]]:
    index: Dict[Tuple[str, str], List[StayInterval]] = defaultdict(list)
    for stay in stays:
        index[(stay.mrn, stay.bed)].append(stay)
    return index


def link_day(bundle: ExtractBundle, bed_map: BedLabelMap,
             max_gap: Optional[timedelta] = DEFAULT_MAX_GAP,
             readmit_gap: timedelta = timedelta(0)) -> Tuple[List[LinkageResult], LinkageReport]:
    """
    Link every monitor stream of a day to an MRN, or mark it unmatched.

    Streams with a lifetime id keep it. The others go through the device-log
    pass, then the sanitized-ADT pass. Never raises for data problems; ADT
    pathologies end up in ``report.warnings``.
    """
    report = LinkageReport()
    events = bundle.adt_events()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UnpairedEvent)
        stays = sanitize_adt(events, window=bundle.bounds, readmit_gap=readmit_gap)
    for warning in caught:
        if issubclass(warning.category, UnpairedEvent):
            report.unpaired_stays += 1
            report.warnings.append(str(warning.message))
            logger.warning("ADT: %s", warning.message)

    visit_mrns = visit_to_mrn(events)
    log_stays = device_log_stays(bundle.device_logs(), bed_map, visit_mrns)
    streams = bundle_stream_ranges(bundle, max_gap)

    paired: List[Tuple[StreamRange, LinkageSegment]] = []
    for stream in streams:
        if not stream.missing_lifetime_id:
            bed = bed_map.normalize(stream.bed_label)
            paired.append((stream, LinkageSegment(
                start=stream.start, end=stream.end, bed_label=bed, device_bed_label=stream.bed_label,
                assigned_mrn=stream.lifetime_id, method=LinkageMethod.LIFETIME_ID,
            )))

    first, pending = _assign(pending_pieces(streams, bed_map), log_stays, LinkageMethod.DEVICE_LOG)
    second = assign_pass2_adt(pending, stays)
    paired.extend((piece.stream, segment) for piece, segment in first + second)

    stay_index, log_index = _index(stays), _index(log_stays)
    by_monitor: Dict[str, List[LinkageSegment]] = defaultdict(list)
    assigned_streams: set[StreamRange] = set()
    for stream, segment in paired:
        by_monitor[stream.monitor_patient_id].append(_with_evidence(segment, stay_index, log_index))
        if stream.missing_lifetime_id and segment.assigned_mrn is not None:
            assigned_streams.add(stream)

    results = [
        LinkageResult(monitor_id, sorted(segments, key=lambda s: (s.start, s.device_bed_label, s.end)))
        for monitor_id, segments in sorted(by_monitor.items())
    ]

    report.total_streams = len(streams)
    report.total_streams_missing_id = sum(1 for s in streams if s.missing_lifetime_id)
    report.assigned = len(assigned_streams)
    methods: Counter[str] = Counter(segment.method.value for _, segment in paired)
    report.per_method = {m.value: methods.get(m.value, 0) for m in LinkageMethod}
    report.tie_breaks = sum(1 for _, segment in paired if segment.tie_broken)
    if report.tie_breaks:
        report.warnings.append(f"{report.tie_breaks} segments decided by the equal-overlap tie-break")
    logger.info("linked %d streams, %d missing lifetime id, coverage %.3f",
                report.total_streams, report.total_streams_missing_id, report.coverage_fraction)
    return results, report


def audit_entries(results: Sequence[LinkageResult]) -> List[Dict[str, Any]]:
    """One JSON-ready object per assigned segment, identifiers included."""
    entries: List[Dict[str, Any]] = []
    for result in results:
        for segment in result.segments:
            entries.append({
                "monitor_patient_id": result.monitor_patient_id,
                "device_bed_label": segment.device_bed_label,
                "bed_label": segment.bed_label,
                "start": format_ts(segment.start),
                "end": format_ts(segment.end),
                "method": segment.method.value,
                "mrn": segment.assigned_mrn,
                "overlap_seconds": segment.overlap_seconds,
                "candidates": segment.candidates,
                "tie_broken": segment.tie_broken,
                "evidence_start": format_ts(segment.evidence_start) if segment.evidence_start is not None else None,
                "evidence_end": format_ts(segment.evidence_end) if segment.evidence_end is not None else None,
            })
    return entries
