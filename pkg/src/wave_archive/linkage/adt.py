"""ADT event sanitization: noisy admit/transfer/discharge rows to clean bed stays."""

import logging
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from datetime import timedelta
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd

from ..extract.schema import AdtEvent, AdtEventKind
from ..utils.errors import UnpairedEvent

logger = logging.getLogger(__name__)

Window = Tuple[pd.Timestamp, pd.Timestamp]


class StaySource(str, Enum):
    DEVICE_LOG = "device_log"
    ADT = "adt"


@dataclass(frozen=True)
class StayInterval:
    mrn: str
    visit_id: str
    bed: str
    start: pd.Timestamp
    end: pd.Timestamp
    source: StaySource = StaySource.ADT
    unpaired: bool = False

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValueError(f"stay must have start < end, got {self.start} .. {self.end}")

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.mrn, self.visit_id, self.bed)

    def overlap_ns(self, start: pd.Timestamp, end: pd.Timestamp) -> int:
        return max(0, min(self.end.value, end.value) - max(self.start.value, start.value))


def _default_window(events: Sequence[AdtEvent]) -> Window:
    first = min(e.at for e in events).floor("D")
    last = max(e.at for e in events).floor("D") + pd.Timedelta(days=1)
    return first, last


def _drop_zero_length_pairs(events: List[AdtEvent]) -> List[AdtEvent]:
    """An arrival and a departure of the same visit+bed at the same instant cancel out."""
    arrivals: Dict[Tuple[str, str, str, pd.Timestamp], List[AdtEvent]] = defaultdict(list)
    departures: Dict[Tuple[str, str, str, pd.Timestamp], List[AdtEvent]] = defaultdict(list)
    for event in events:
        key = (event.mrn, event.visit_id, event.bed, event.at)
        (arrivals if event.event.is_arrival else departures)[key].append(event)

    dropped: set[int] = set()
    for key, ins in arrivals.items():
        outs = departures.get(key, [])
        for arrival, departure in zip(sorted(ins, key=lambda e: e.event_id),
                                      sorted(outs, key=lambda e: e.event_id)):
            dropped.add(arrival.event_id)
            dropped.add(departure.event_id)
    return [e for e in events if e.event_id not in dropped]


def _drop_duplicates(events: List[AdtEvent]) -> List[AdtEvent]:
    seen: set[Tuple[str, str, str, AdtEventKind, pd.Timestamp]] = set()
    kept: List[AdtEvent] = []
    for event in sorted(events, key=lambda e: e.event_id):
        key = (event.mrn, event.visit_id, event.bed, event.event, event.at)
        if key not in seen:
            seen.add(key)
            kept.append(event)
    return kept


def _pair_events(events: List[AdtEvent], window: Window) -> List[StayInterval]:
    """Walk one visit+bed's events in time order and pair arrivals with departures."""
    ordered = sorted(events, key=lambda e: (e.at, e.event.is_arrival, e.event_id))
    mrn, visit_id, bed = ordered[0].mrn, ordered[0].visit_id, ordered[0].bed
    opened: Optional[pd.Timestamp] = None
    spans: List[Tuple[pd.Timestamp, pd.Timestamp, bool]] = []

    for event in ordered:
        if event.event.is_arrival:
            if opened is None:
                opened = event.at
        elif opened is not None:
            spans.append((opened, event.at, False))
            opened = None
        elif spans:
            # repeated departure: the stay ran on until the later one
            start, end, unpaired = spans[-1]
            spans[-1] = (start, max(end, event.at), unpaired)
        else:
            warnings.warn(UnpairedEvent("departure without arrival; stay opened at window start"))
            spans.append((window[0], event.at, True))
    if opened is not None:
        warnings.warn(UnpairedEvent("arrival without departure; stay closed at window end"))
        spans.append((opened, window[1], True))

    return [
        StayInterval(mrn, visit_id, bed, start, end, StaySource.ADT, unpaired)
        for start, end, unpaired in spans
        if start < end
    ]


def _merge_readmits(stays: List[StayInterval], readmit_gap: timedelta) -> List[StayInterval]:
    """Keep the first admit and last discharge of back-to-back stays."""
    merged: List[StayInterval] = []
    gap = pd.Timedelta(readmit_gap)
    for stay in sorted(stays, key=lambda s: (s.start, s.end)):
        if merged and stay.start - merged[-1].end <= gap:
            last = merged[-1]
            merged[-1] = replace(last, end=max(last.end, stay.end), unpaired=last.unpaired or stay.unpaired)
        else:
            merged.append(stay)
    return merged


def sanitize_adt(events: Sequence[AdtEvent], window: Optional[Window] = None,
                 readmit_gap: timedelta = timedelta(0)) -> List[StayInterval]:
    """
    Turn raw ADT events into one interval per contiguous (mrn, visit, bed) stay.

    Rules, in order: same-instant in/out pairs are ignored, exact duplicates
    are removed, discharge-then-readmit chains on the same bed are merged.
    Events left open at either window edge produce intervals clipped to the
    window and flagged ``unpaired``.
    """
    if not events:
        return []
    window = window or _default_window(events)

    cleaned = _drop_duplicates(_drop_zero_length_pairs(list(events)))
    by_key: Dict[Tuple[str, str, str], List[AdtEvent]] = defaultdict(list)
    for event in cleaned:
        by_key[(event.mrn, event.visit_id, event.bed)].append(event)

    stays: List[StayInterval] = []
    for key in sorted(by_key):
        stays.extend(_merge_readmits(_pair_events(by_key[key], window), readmit_gap))

    dropped = len(events) - len(cleaned)
    if dropped:
        logger.debug("ADT sanitization dropped %d of %d events", dropped, len(events))
    return sorted(stays, key=lambda s: (s.start, s.bed, s.mrn, s.visit_id))


def stays_to_events(stays: Iterable[StayInterval]) -> List[AdtEvent]:
    """Render stays back as Admission/Discharge event pairs."""
    events: List[AdtEvent] = []
    for stay in stays:
        for kind, at in ((AdtEventKind.ADMISSION, stay.start), (AdtEventKind.DISCHARGE, stay.end)):
            events.append(AdtEvent(event_id=len(events) + 1, patient_name="", mrn=stay.mrn,
                                   visit_id=stay.visit_id, event=kind, bed=stay.bed, at=at))
    return events


def visit_to_mrn(events: Sequence[AdtEvent]) -> Dict[str, str]:
    """Encounter (visit) id to MRN, as seen in the ADT feed."""
    owners: Dict[str, Counter[str]] = defaultdict(Counter)
    for event in events:
        owners[event.visit_id][event.mrn] += 1
    mapping: Dict[str, str] = {}
    for visit_id, mrns in owners.items():
        if len(mrns) > 1:
            logger.warning("visit id maps to %d MRNs; using the first in sort order", len(mrns))
        mapping[visit_id] = sorted(mrns)[0]
    return mapping
