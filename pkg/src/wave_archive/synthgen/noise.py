from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from ..extract.schema import AdtEventKind
from .scenario import AdtNoise

DAY_SECONDS = 86_400
# readmit splits stay this far from either end of the stay
READMIT_MARGIN_SECONDS = 600


class NoiseType(Enum):
    """ADT pathologies that can be injected"""
    ZERO_LENGTH_PAIR = "zero_length_pairs"
    DUPLICATE = "duplicates"
    READMIT_CHAIN = "readmit_chains"


@dataclass(frozen=True)
class PlannedEvent:
    """An ADT row before event ids are assigned; ``at`` is seconds from midnight."""
    patient_name: str
    mrn: str
    visit_id: str
    event: AdtEventKind
    bed: str
    at: int


@dataclass(frozen=True)
class PlannedStay:
    patient_name: str
    mrn: str
    visit_id: str
    bed: str
    start: int
    end: int


class AdtNoiseInjector:
    """
    Adds the three ADT pathologies the sanitizer removes: admission and
    discharge at the same instant, repeated rows, and a stay charted as a
    discharge followed shortly by a readmission to the same bed.
    """

    def __init__(self, noise: AdtNoise, rng: np.random.Generator, readmit_gap_seconds: int):
        self.noise = noise
        self.rng = rng
        self.readmit_gap_seconds = readmit_gap_seconds
        self.counts: Dict[NoiseType, int] = {t: 0 for t in NoiseType}

    def inject(self, events: Sequence[PlannedEvent], stays: Sequence[PlannedStay],
               beds: Sequence[str]) -> List[PlannedEvent]:
        noisy = list(events)
        if self.noise.silent:
            return noisy

        for stay in stays:
            if self.rng.random() < self.noise.readmit_chains:
                noisy.extend(self._readmit_chain(stay))

        duplicates = [e for e in noisy if self.rng.random() < self.noise.duplicates]
        self.counts[NoiseType.DUPLICATE] += len(duplicates)
        noisy.extend(replace(e) for e in duplicates)

        visits = sorted({(e.patient_name, e.mrn, e.visit_id) for e in events}, key=lambda v: (v[1], v[2]))
        for name, mrn, visit_id in visits:
            if self.rng.random() < self.noise.zero_length_pairs:
                bed = beds[int(self.rng.integers(0, len(beds)))]
                at = int(self.rng.integers(0, DAY_SECONDS))
                noisy.append(PlannedEvent(name, mrn, visit_id, AdtEventKind.ADMISSION, bed, at))
                noisy.append(PlannedEvent(name, mrn, visit_id, AdtEventKind.DISCHARGE, bed, at))
                self.counts[NoiseType.ZERO_LENGTH_PAIR] += 1
        return noisy

    def _readmit_chain(self, stay: PlannedStay) -> List[PlannedEvent]:
        gap = int(self.rng.integers(1, self.readmit_gap_seconds + 1))
        lo = stay.start + READMIT_MARGIN_SECONDS
        hi = stay.end - READMIT_MARGIN_SECONDS - gap
        if hi <= lo:
            return []
        split = int(self.rng.integers(lo, hi))
        self.counts[NoiseType.READMIT_CHAIN] += 1
        return [
            PlannedEvent(stay.patient_name, stay.mrn, stay.visit_id, AdtEventKind.DISCHARGE, stay.bed, split),
            PlannedEvent(stay.patient_name, stay.mrn, stay.visit_id, AdtEventKind.ADMISSION, stay.bed,
                         split + gap),
        ]

    def get_statistics(self) -> Dict[str, Any]:
        """Get injection counts per pathology"""
        return {t.value: self.counts[t] for t in NoiseType}


def event_rows(events: Sequence[PlannedEvent], day_start: pd.Timestamp) -> List[Dict[str, Any]]:
    """ADT CSV rows with event ids numbered in time order."""
    order = {kind: i for i, kind in enumerate(AdtEventKind)}
    ordered = sorted(events, key=lambda e: (e.at, e.mrn, e.visit_id, e.bed, order[e.event]))
    return [
        {
            "event_id": number,
            "patient_name": e.patient_name,
            "mrn": e.mrn,
            "visit_id": e.visit_id,
            "event": e.event.value,
            "bed": e.bed,
            "at": day_start + pd.Timedelta(seconds=e.at),
        }
        for number, e in enumerate(ordered, start=1)
    ]
