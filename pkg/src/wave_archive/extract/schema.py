"""On-disk schema of a daily extract bundle and the typed records parsed from it."""

from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..utils.utils import day_bounds, from_ns, samples_duration_ns
from .waves import WaveKind, lookup_wave

MANIFEST_FILE = "manifest.csv"
COUNTS_FILE = "counts.csv"
MANIFEST_COLUMNS = ["file_name", "created_at", "size_bytes", "sha256"]
COUNTS_COLUMNS = ["table", "rows"]

TABLE_COLUMNS: Dict[str, List[str]] = {
    "numerics": ["monitor_patient_id", "lifetime_id", "bed_label", "observed_at", "metric", "value", "unit"],
    "wave_samples": ["monitor_patient_id", "lifetime_id", "bed_label", "wave", "block_start", "sample_rate",
                     "samples"],
    "enumerations": ["monitor_patient_id", "lifetime_id", "bed_label", "observed_at", "label", "value"],
    "alerts": ["monitor_patient_id", "lifetime_id", "bed_label", "at", "severity", "text"],
    "device_logs": ["encounter_id", "bed_label", "attach_at", "detach_at"],
    "adt_events": ["event_id", "patient_name", "mrn", "visit_id", "event", "bed", "at"],
}
TABLES = list(TABLE_COLUMNS)

# Point timestamps must lie in [day, day+1); interval ends may reach day+1.
POINT_COLUMNS: Dict[str, List[str]] = {
    "numerics": ["observed_at"],
    "wave_samples": ["block_start"],
    "enumerations": ["observed_at"],
    "alerts": ["at"],
    "device_logs": ["attach_at"],
    "adt_events": ["at"],
}
END_COLUMNS: Dict[str, List[str]] = {"device_logs": ["detach_at"]}


def table_file(table: str) -> str:
    return f"{table}.csv"


class Metric(str, Enum):
    HR = "HR"
    SPO2 = "SpO2"
    BP_SYS = "BP_SYS"
    BP_DIA = "BP_DIA"
    RR = "RR"


class AlertSeverity(str, Enum):
    RED = "red"
    YELLOW = "yellow"
    TECHNICAL = "technical"


class AdtEventKind(str, Enum):
    ADMISSION = "Admission"
    DISCHARGE = "Discharge"
    TRANSFER_IN = "TransferIn"
    TRANSFER_OUT = "TransferOut"

    @property
    def is_arrival(self) -> bool:
        return self in (AdtEventKind.ADMISSION, AdtEventKind.TRANSFER_IN)


@dataclass(frozen=True)
class ManifestEntry:
    file_name: str
    created_at: pd.Timestamp
    size_bytes: int
    checksum: str


@dataclass(frozen=True)
class NumericRecord:
    monitor_patient_id: str
    bed_label: str
    observed_at: pd.Timestamp
    metric: str
    value: float
    unit: str
    lifetime_id: Optional[str] = None


@dataclass(frozen=True)
class WaveSampleRecord:
    monitor_patient_id: str
    bed_label: str
    wave: WaveKind
    block_start: pd.Timestamp
    sample_rate: int
    samples: np.ndarray = field(compare=False, repr=False)
    lifetime_id: Optional[str] = None

    @property
    def n_samples(self) -> int:
        return int(len(self.samples))

    @property
    def block_end(self) -> pd.Timestamp:
        return from_ns(self.block_start.value + samples_duration_ns(self.n_samples, self.sample_rate))


@dataclass(frozen=True)
class AlertRecord:
    monitor_patient_id: str
    bed_label: str
    at: pd.Timestamp
    severity: AlertSeverity
    text: str
    lifetime_id: Optional[str] = None


@dataclass(frozen=True)
class DeviceLogRecord:
    encounter_id: str
    bed_label: str
    attach_at: pd.Timestamp
    detach_at: pd.Timestamp


@dataclass(frozen=True)
class AdtEvent:
    event_id: int
    patient_name: str
    mrn: str
    visit_id: str
    event: AdtEventKind
    bed: str
    at: pd.Timestamp


@dataclass(frozen=True)
class MonitorPatientStream:
    """A monitor data stream on one bed, or a single observation of it."""
    monitor_patient_id: str
    bed_label: str
    first_seen: pd.Timestamp
    last_seen: pd.Timestamp
    lifetime_id: Optional[str] = None

    @property
    def missing_lifetime_id(self) -> bool:
        return not self.lifetime_id


@dataclass(frozen=True)
class TableCount:
    declared: Optional[int]
    actual: int

    @property
    def match(self) -> Optional[bool]:
        if self.declared is None:
            return None
        return self.declared == self.actual


@dataclass(frozen=True)
class CountReport:
    tables: Dict[str, TableCount]

    @property
    def ok(self) -> Optional[bool]:
        """True when every table matches, None when counts were not declared."""
        matches = [count.match for count in self.tables.values()]
        if any(m is False for m in matches):
            return False
        if any(m is None for m in matches):
            return None
        return True

    def mismatched(self) -> List[str]:
        return [name for name, count in self.tables.items() if count.match is False]

    def to_dict(self) -> Dict[str, object]:
        return {
            "ok": self.ok,
            "tables": {
                name: {"declared": c.declared, "actual": c.actual, "match": c.match}
                for name, c in sorted(self.tables.items())
            },
        }


@dataclass
class ExtractBundle:
    """One calendar day of monitor and EMR tables, parsed and validated."""
    day: date
    manifest: List[ManifestEntry]
    tables: Dict[str, pd.DataFrame]
    declared_counts: Optional[Dict[str, int]] = None
    _blocks: Optional[List[WaveSampleRecord]] = field(default=None, init=False, repr=False)

    @property
    def bounds(self) -> Tuple[pd.Timestamp, pd.Timestamp]:
        return day_bounds(self.day)

    @property
    def numerics(self) -> pd.DataFrame:
        return self.tables["numerics"]

    @property
    def alerts(self) -> pd.DataFrame:
        return self.tables["alerts"]

    @property
    def enumerations(self) -> pd.DataFrame:
        return self.tables["enumerations"]

    def wave_blocks(self) -> List[WaveSampleRecord]:
        if self._blocks is None:
            frame = self.tables["wave_samples"]
            self._blocks = [
                WaveSampleRecord(
                    monitor_patient_id=row.monitor_patient_id,
                    bed_label=row.bed_label,
                    wave=lookup_wave(row.wave),
                    block_start=row.block_start,
                    sample_rate=int(row.sample_rate),
                    samples=row.samples,
                    lifetime_id=row.lifetime_id or None,
                )
                for row in frame.itertuples(index=False)
            ]
        return self._blocks

    def adt_events(self) -> List[AdtEvent]:
        frame = self.tables["adt_events"]
        return [
            AdtEvent(
                event_id=int(row.event_id),
                patient_name=row.patient_name,
                mrn=row.mrn,
                visit_id=row.visit_id,
                event=AdtEventKind(row.event),
                bed=row.bed,
                at=row.at,
            )
            for row in frame.itertuples(index=False)
        ]

    def device_logs(self) -> List[DeviceLogRecord]:
        frame = self.tables["device_logs"]
        return [
            DeviceLogRecord(
                encounter_id=row.encounter_id,
                bed_label=row.bed_label,
                attach_at=row.attach_at,
                detach_at=row.detach_at,
            )
            for row in frame.itertuples(index=False)
        ]

    def identifiers(self) -> List[str]:
        """Patient names, MRNs and visit ids seen in the EMR tables of the day."""
        adt = self.tables["adt_events"]
        logs = self.tables["device_logs"]
        values = set(adt["patient_name"]) | set(adt["mrn"]) | set(adt["visit_id"]) | set(logs["encounter_id"])
        for table in ("numerics", "wave_samples", "enumerations", "alerts"):
            values |= set(self.tables[table]["lifetime_id"])
        return sorted(v for v in values if v)
