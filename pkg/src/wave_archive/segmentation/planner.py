"""Study planning: linked segments to day-clipped, non-overlapping study windows."""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..extract.schema import ExtractBundle
from ..linkage.matcher import LinkageMethod, LinkageResult, LinkageSegment
from ..utils.utils import compact_ts

logger = logging.getLogger(__name__)

MAX_STUDY_LENGTH = pd.Timedelta(hours=24)


@dataclass(frozen=True)
class StudySkeleton:
    study_id: str
    mrn: Optional[str]
    monitor_patient_id: str
    device_bed_label: str
    bed_label: str
    start: pd.Timestamp
    end: pd.Timestamp
    linkage_method: LinkageMethod

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValueError(f"study {self.study_id} has an empty range")
        if self.end - self.start > MAX_STUDY_LENGTH:
            raise ValueError(f"study {self.study_id} is longer than 24 hours")

    @property
    def lifetime_id_source(self) -> bool:
        return self.linkage_method is LinkageMethod.LIFETIME_ID

    @property
    def key(self) -> Tuple[str, str]:
        return (self.monitor_patient_id, self.device_bed_label)


def study_identifier(monitor_patient_id: str, bed_label: str, start: pd.Timestamp) -> str:
    """``<monitor id>_<bed>_<start as YYYYMMDDThhmmssZ>``"""
    return f"{monitor_patient_id}_{bed_label}_{compact_ts(start)}"


def _away(start: pd.Timestamp, end: pd.Timestamp, elsewhere: Sequence[Tuple[pd.Timestamp, pd.Timestamp]]) -> bool:
    return any(s < end and e > start for s, e in elsewhere)


def _merge_same_patient(segments: List[LinkageSegment],
                        elsewhere: Sequence[Tuple[pd.Timestamp, pd.Timestamp]] = ()) -> List[LinkageSegment]:
    """
    Consecutive pieces of one patient on one bed form one study, unless the
    stream was seen on another bed (``elsewhere``) in between.
    """
    merged: List[LinkageSegment] = []
    for segment in segments:
        last = merged[-1] if merged else None
        if (last is not None and segment.assigned_mrn is not None
                and last.assigned_mrn == segment.assigned_mrn and last.method == segment.method
                and not _away(last.end, segment.start, elsewhere)):
            evidence_start = min((t for t in (last.evidence_start, segment.evidence_start) if t is not None),
                                 default=None)
            evidence_end = max((t for t in (last.evidence_end, segment.evidence_end) if t is not None),
                               default=None)
            merged[-1] = LinkageSegment(
                start=last.start, end=max(last.end, segment.end), bed_label=last.bed_label,
                device_bed_label=last.device_bed_label, assigned_mrn=last.assigned_mrn, method=last.method,
                overlap_seconds=max(last.overlap_seconds, segment.overlap_seconds),
                candidates=max(last.candidates, segment.candidates),
                tie_broken=last.tie_broken or segment.tie_broken,
                evidence_start=evidence_start, evidence_end=evidence_end,
            )
        else:
            merged.append(segment)
    return merged


def _windows(segments: List[LinkageSegment], day_start: pd.Timestamp,
             day_end: pd.Timestamp) -> List[Tuple[pd.Timestamp, pd.Timestamp]]:
    """
    Study window per segment of one (monitor, device bed).

    A window is the segment widened to its EMR evidence, clipped to the day,
    kept off the neighbouring segments' data; where two windows still
    overlap the later one's start wins.
    """
    windows: List[List[pd.Timestamp]] = []
    for segment in segments:
        start, end = segment.start, segment.end
        if segment.evidence_start is not None and segment.evidence_end is not None:
            start, end = min(start, segment.evidence_start), max(end, segment.evidence_end)
        windows.append([max(start, day_start), min(end, day_end)])

    for i in range(len(windows) - 1):
        floor = min(segments[i].end, segments[i + 1].start)
        windows[i + 1][0] = max(windows[i + 1][0], floor)
        windows[i][1] = min(windows[i][1], windows[i + 1][0])
    return [(start, end) for start, end in windows]


def plan_studies(linkage: Sequence[LinkageResult], bundle: ExtractBundle) -> List[StudySkeleton]:
    """
    One skeleton per linked patient segment and bed, within the bundle day.

    Windows clamp to EMR stay (or device log) boundaries where those exist;
    a bed change is always a study boundary because segments never span two
    beds, and a return to an earlier bed starts a new study there.
    """
    day_start, day_end = bundle.bounds
    groups: Dict[Tuple[str, str], List[LinkageSegment]] = defaultdict(list)
    spans: Dict[str, List[Tuple[str, pd.Timestamp, pd.Timestamp]]] = defaultdict(list)
    for result in linkage:
        for segment in result.segments:
            groups[(result.monitor_patient_id, segment.device_bed_label)].append(segment)
            spans[result.monitor_patient_id].append((segment.device_bed_label, segment.start, segment.end))

    skeletons: List[StudySkeleton] = []
    for (monitor_id, device_bed), segments in sorted(groups.items()):
        elsewhere = [(start, end) for bed, start, end in spans[monitor_id] if bed != device_bed]
        ordered = _merge_same_patient(sorted(segments, key=lambda s: (s.start, s.end)), elsewhere)
        for segment, (start, end) in zip(ordered, _windows(ordered, day_start, day_end)):
            if not start < end:
                logger.debug("dropping empty study window on bed %s", segment.bed_label)
                continue
            skeletons.append(StudySkeleton(
                study_id=study_identifier(monitor_id, segment.bed_label, start),
                mrn=segment.assigned_mrn,
                monitor_patient_id=monitor_id,
                device_bed_label=device_bed,
                bed_label=segment.bed_label,
                start=start,
                end=end,
                linkage_method=segment.method,
            ))
    return sorted(skeletons, key=lambda s: (s.start, s.study_id))

