"""
Deterministic synthetic extract bundles with ground truth.

A day is laid out as per-bed timelines of patient stays. Each stay is one
monitor stream on one bed; transfers move a patient to a second bed, with
a fresh monitor id most of the time, and operating-room style beds may hand
the previous occupant's monitor id to the next patient. Generation is a
pure function of (scenario, day).
"""

import logging
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple

import numpy as np
import pandas as pd

from ..extract.manifest import build_manifest, write_manifest
from ..extract.schema import (
    COUNTS_COLUMNS,
    COUNTS_FILE,
    MANIFEST_FILE,
    TABLE_COLUMNS,
    TABLES,
    AdtEventKind,
    AlertSeverity,
    Metric,
    table_file,
)
from ..extract.waves import lookup_wave
from ..linkage.bed_labels import NATO_ALPHABET, NATO_LETTERS
from ..segmentation.planner import study_identifier
from ..utils.utils import day_bounds, format_ts, read_json, staged_directory, utc, write_json
from .noise import DAY_SECONDS, AdtNoiseInjector, PlannedEvent, PlannedStay, event_rows
from .scenario import ScenarioConfig
from .waveforms import waveform_for

logger = logging.getLogger(__name__)

# last stay must end this long before midnight
END_MARGIN_SECONDS = 900
EDGE_SECONDS = 120
SHARED_TURNOVER_MINUTES = (1, 3)
ENUMERATION_INTERVAL_SECONDS = 600
MAX_AGE_DAYS = 18 * 365

FIRST_NAMES = ["Olivia", "Liam", "Emma", "Noah", "Amelia", "Oliver", "Sophia", "Elijah", "Isabella", "Mateo",
               "Mia", "Lucas", "Harper", "Levi", "Evelyn", "Ezra", "Luna", "Asher", "Camila", "James"]
LAST_NAMES = ["Garcia", "Nguyen", "Smith", "Johnson", "Okafor", "Patel", "Kowalski", "Rossi", "Tanaka",
              "Haddad", "Murphy", "Silva", "Novak", "Cohen", "Larsen", "Moreau", "Ibrahim", "Schmidt"]
ALERT_TEXTS = {
    AlertSeverity.RED: ["HR High", "SpO2 Low", "Apnea", "Asystole"],
    AlertSeverity.YELLOW: ["HR Low", "RR High", "SpO2 Desat"],
    AlertSeverity.TECHNICAL: ["Leads Off", "SpO2 Probe Off", "Check Cuff"],
}
RHYTHMS = ["Sinus Rhythm", "Sinus Tachy", "Sinus Brady", "Paced"]
# metric -> (unit, mean, spread)
NUMERIC_PROFILE = {
    Metric.HR: ("bpm", 120.0, 15.0),
    Metric.SPO2: ("%", 97.0, 1.5),
    Metric.RR: ("rpm", 30.0, 5.0),
}


def device_bed_label(index: int) -> str:
    """Monitor-side label of bed ``index``: 01ALPHA, 01BRAVO, ..., 02ALPHA, ..."""
    return f"{index // 26 + 1:02d}{NATO_ALPHABET[index % 26]}"


def emr_bed_label(index: int) -> str:
    return f"{NATO_LETTERS[NATO_ALPHABET[index % 26]]}{index // 26 + 1:02d}"


def bed_unit_rows(config: ScenarioConfig) -> List[Tuple[str, str]]:
    """(EMR bed, clinical unit) for every generated bed."""
    return [(emr_bed_label(i), config.units[i % len(config.units)]) for i in range(config.beds)]


def write_bed_units(path: Path, config: ScenarioConfig) -> None:
    frame = pd.DataFrame(bed_unit_rows(config), columns=["bed", "unit"])
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")


@dataclass(frozen=True)
class TruePatient:
    mrn: str
    visit_id: str
    name: str
    birth_date: date


@dataclass(frozen=True)
class TrueSegment:
    """One stay: a patient on one bed under one monitor patient id."""
    monitor_patient_id: str
    device_bed_label: str
    bed_label: str
    mrn: str
    visit_id: str
    start: pd.Timestamp
    end: pd.Timestamp
    data_start: pd.Timestamp
    data_end: pd.Timestamp
    lifetime_id_present: bool
    waves: Dict[str, int] = field(default_factory=dict)

    @property
    def study_id(self) -> str:
        return study_identifier(self.monitor_patient_id, self.bed_label, self.start)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "monitor_patient_id": self.monitor_patient_id,
            "device_bed_label": self.device_bed_label,
            "bed_label": self.bed_label,
            "mrn": self.mrn,
            "visit_id": self.visit_id,
            "start": format_ts(self.start),
            "end": format_ts(self.end),
            "data_start": format_ts(self.data_start),
            "data_end": format_ts(self.data_end),
            "lifetime_id_present": self.lifetime_id_present,
            "waves": dict(sorted(self.waves.items())),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrueSegment':
        return cls(
            monitor_patient_id=data["monitor_patient_id"],
            device_bed_label=data["device_bed_label"],
            bed_label=data["bed_label"],
            mrn=data["mrn"],
            visit_id=data["visit_id"],
            start=utc(data["start"]),
            end=utc(data["end"]),
            data_start=utc(data["data_start"]),
            data_end=utc(data["data_end"]),
            lifetime_id_present=bool(data["lifetime_id_present"]),
            waves={k: int(v) for k, v in data["waves"].items()},
        )


@dataclass
class GroundTruth:
    day: date
    patients: List[TruePatient]
    segments: List[TrueSegment]
    row_counts: Dict[str, int]
    noise: Dict[str, int] = field(default_factory=dict)

    def birthdates(self) -> Dict[str, date]:
        return {p.mrn: p.birth_date for p in self.patients}

    def expected_stats(self) -> Dict[str, Any]:
        """Catalog figures the archive of this day must reproduce when linkage is exact."""
        return merge_expected_stats([self])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "day": self.day.isoformat(),
            "patients": [
                {"mrn": p.mrn, "visit_id": p.visit_id, "name": p.name, "birth_date": p.birth_date.isoformat()}
                for p in self.patients
            ],
            "segments": [s.to_dict() for s in self.segments],
            "row_counts": dict(sorted(self.row_counts.items())),
            "noise": dict(sorted(self.noise.items())),
            "expected_stats": self.expected_stats(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GroundTruth':
        return cls(
            day=date.fromisoformat(data["day"]),
            patients=[TruePatient(p["mrn"], p["visit_id"], p["name"], date.fromisoformat(p["birth_date"]))
                      for p in data["patients"]],
            segments=[TrueSegment.from_dict(s) for s in data["segments"]],
            row_counts={k: int(v) for k, v in data["row_counts"].items()},
            noise={k: int(v) for k, v in data.get("noise", {}).items()},
        )


def truth_path(out_root: Path, day: date) -> Path:
    return out_root / f"{day.isoformat()}.truth.json"


def load_truth(out_root: Path, day: date) -> GroundTruth:
    return GroundTruth.from_dict(read_json(truth_path(out_root, day)))


@dataclass
class _Stay:
    patient: TruePatient
    bed: int
    monitor_patient_id: str
    start: int
    end: int
    data_start: int
    data_end: int
    lifetime_id_present: bool


class _DayBuilder:
    def __init__(self, config: ScenarioConfig, day: date):
        self.config = config
        self.day = day
        self.day_start, _ = day_bounds(day)
        self.rng = np.random.default_rng([config.seed, day.toordinal()])
        self.taken: Set[str] = set()
        self.rows: Dict[str, List[Dict[str, Any]]] = {table: [] for table in TABLES}

    def _unique(self, prefix: str, digits: int) -> str:
        while True:
            value = f"{prefix}{int(self.rng.integers(10 ** (digits - 1), 10 ** digits))}"
            if value not in self.taken:
                self.taken.add(value)
                return value

    def _ts(self, seconds: int) -> pd.Timestamp:
        return self.day_start + pd.Timedelta(seconds=int(seconds))

    def _patient(self) -> TruePatient:
        first = FIRST_NAMES[int(self.rng.integers(0, len(FIRST_NAMES)))]
        last = LAST_NAMES[int(self.rng.integers(0, len(LAST_NAMES)))]
        age_days = int(self.rng.integers(0, MAX_AGE_DAYS))
        return TruePatient(
            mrn=self._unique("MRN", 8),
            visit_id=self._unique("VN", 9),
            name=f"{last}, {first}",
            birth_date=date.fromordinal(self.day.toordinal() - age_days),
        )

    def _minutes(self, bounds: Tuple[int, int]) -> int:
        return int(self.rng.integers(bounds[0], bounds[1] + 1)) * 60

    def _edges(self, start: int, end: int) -> Tuple[int, int]:
        lead = int(self.rng.integers(0, EDGE_SECONDS + 1))
        lag = int(self.rng.integers(0, EDGE_SECONDS + 1))
        return start + lead, end - lag

    def schedule(self) -> List[List[_Stay]]:
        """Stays per patient, in admission order."""
        cfg = self.config
        free = [int(self.rng.integers(0, 3600)) for _ in range(cfg.beds)]
        last_stay: List[Optional[_Stay]] = [None] * cfg.beds
        monitor_bed: Dict[str, int] = {}
        plans: List[List[_Stay]] = []

        for _ in range(cfg.patients_per_day):
            order = [int(b) for b in self.rng.permutation(cfg.beds)]
            first_bed = min(order, key=lambda b: free[b])
            previous = last_stay[first_bed]
            # a stream can only be handed on while it is still on this bed and carries no lifetime id
            shared = (previous is not None and not previous.lifetime_id_present
                      and monitor_bed.get(previous.monitor_patient_id) == first_bed
                      and self.rng.random() < cfg.or_shared_stream_fraction)
            turnover = self._minutes(SHARED_TURNOVER_MINUTES if shared else cfg.turnover_minutes)
            start = free[first_bed] + turnover
            first_length = self._minutes(cfg.stay_minutes)

            moves = cfg.beds > 1 and self.rng.random() < cfg.transfer_rate
            second_bed, transfer_at, end = -1, -1, start + first_length
            if moves:
                second_bed = min((b for b in order if b != first_bed), key=lambda b: free[b])
                transfer_at = max(start + first_length, free[second_bed] + self._minutes(cfg.turnover_minutes))
                end = transfer_at + self._minutes(cfg.stay_minutes)
                if end > DAY_SECONDS - END_MARGIN_SECONDS:
                    moves, end = False, start + first_length
            if end > DAY_SECONDS - END_MARGIN_SECONDS:
                break

            patient = self._patient()
            monitor = previous.monitor_patient_id if shared and previous is not None else self._unique("MP", 7)
            missing = shared or self.rng.random() < cfg.missing_lifetime_id_fraction
            first_end = transfer_at if moves else end
            data = self._edges(start, first_end)
            stays = [_Stay(patient, first_bed, monitor, start, first_end, data[0], data[1], not missing)]
            free[first_bed] = first_end
            last_stay[first_bed] = stays[0]
            monitor_bed[monitor] = first_bed

            if moves:
                if self.rng.random() < cfg.new_monitor_id_on_transfer:
                    monitor = self._unique("MP", 7)
                missing = self.rng.random() < cfg.missing_lifetime_id_fraction
                data = self._edges(transfer_at, end)
                stays.append(_Stay(patient, second_bed, monitor, transfer_at, end, data[0], data[1], not missing))
                free[second_bed] = end
                last_stay[second_bed] = stays[1]
                monitor_bed[monitor] = second_bed
            plans.append(stays)
        return plans

    def _stream_row(self, stay: _Stay) -> Dict[str, Any]:
        return {
            "monitor_patient_id": stay.monitor_patient_id,
            "lifetime_id": stay.patient.mrn if stay.lifetime_id_present else "",
            "bed_label": device_bed_label(stay.bed),
        }

    def _numerics(self, stay: _Stay) -> None:
        times = np.arange(stay.data_start, stay.data_end, self.config.numeric_interval_seconds)
        base = self._stream_row(stay)
        for metric, (unit, mean, spread) in NUMERIC_PROFILE.items():
            level = mean + self.rng.normal(0.0, spread / 2)
            values = level + self.rng.normal(0.0, spread / 4, times.size)
            for t, value in zip(times, values):
                self.rows["numerics"].append({**base, "observed_at": self._ts(t), "metric": metric.value,
                                              "value": f"{value:.1f}", "unit": unit})

    def _enumerations(self, stay: _Stay) -> None:
        base = self._stream_row(stay)
        for t in range(stay.data_start, stay.data_end, ENUMERATION_INTERVAL_SECONDS):
            rhythm = RHYTHMS[int(self.rng.integers(0, len(RHYTHMS)))]
            self.rows["enumerations"].append({**base, "observed_at": self._ts(t), "label": "Rhythm",
                                              "value": rhythm})

    def _alerts(self, stay: _Stay) -> None:
        cfg = self.config
        hours = (stay.data_end - stay.data_start) / 3600.0
        count = int(self.rng.poisson(cfg.alerts_per_hour * hours))
        base = self._stream_row(stay)
        severities = list(AlertSeverity)
        for t in sorted(int(x) for x in self.rng.integers(stay.data_start, stay.data_end, count)):
            severity = severities[int(self.rng.integers(0, len(severities)))]
            texts = ALERT_TEXTS[severity]
            text = texts[int(self.rng.integers(0, len(texts)))]
            if self.rng.random() < cfg.name_in_alert_fraction:
                text = f"{text} ({stay.patient.name})"
            self.rows["alerts"].append({**base, "at": self._ts(t), "severity": severity.value, "text": text})

    def _waves(self, stay: _Stay, symbols: List[str], periods: Dict[str, float]) -> Dict[str, int]:
        cfg = self.config
        base = self._stream_row(stay)
        expected: Dict[str, int] = {}
        last_start = stay.data_end - cfg.wave_block_seconds
        starts = list(range(stay.data_start, last_start + 1, cfg.wave_block_interval_seconds))
        for symbol in symbols:
            wave = lookup_wave(symbol)
            generator = waveform_for(wave)
            block_samples = cfg.wave_block_seconds * wave.rate
            for t in starts:
                samples = generator.generate(self.rng, block_samples, periods[symbol])
                self.rows["wave_samples"].append({
                    **base, "wave": symbol, "block_start": self._ts(t), "sample_rate": wave.rate,
                    "samples": ";".join(f"{x:.4f}" for x in samples),
                })
            if starts:
                expected[symbol] = (starts[-1] - starts[0]) * wave.rate + block_samples
        return expected

    def _jittered(self, instants: List[int]) -> List[int]:
        jitter = self.config.adt_jitter_seconds
        if not jitter:
            return instants
        moved = [min(max(t + int(self.rng.integers(-jitter, jitter + 1)), 0), DAY_SECONDS - 1) for t in instants]
        if all(b - a >= 60 for a, b in zip(moved, moved[1:])):
            return moved
        return instants

    def _adt(self, stays: List[_Stay]) -> List[PlannedEvent]:
        patient = stays[0].patient
        instants = self._jittered([stays[0].start] + [s.end for s in stays])
        events = [PlannedEvent(patient.name, patient.mrn, patient.visit_id, AdtEventKind.ADMISSION,
                               emr_bed_label(stays[0].bed), instants[0])]
        for (leaving, arriving), at in zip(zip(stays, stays[1:]), instants[1:-1]):
            events.append(PlannedEvent(patient.name, patient.mrn, patient.visit_id, AdtEventKind.TRANSFER_OUT,
                                       emr_bed_label(leaving.bed), at))
            events.append(PlannedEvent(patient.name, patient.mrn, patient.visit_id, AdtEventKind.TRANSFER_IN,
                                       emr_bed_label(arriving.bed), at))
        events.append(PlannedEvent(patient.name, patient.mrn, patient.visit_id, AdtEventKind.DISCHARGE,
                                   emr_bed_label(stays[-1].bed), instants[-1]))
        return events

    def build(self) -> Tuple[GroundTruth, Dict[str, List[Dict[str, Any]]]]:
        cfg = self.config
        plans = self.schedule()
        patients: List[TruePatient] = []
        segments: List[TrueSegment] = []
        events: List[PlannedEvent] = []
        planned_stays: List[PlannedStay] = []

        for stays in plans:
            patient = stays[0].patient
            patients.append(patient)
            low, high = cfg.waves_per_patient
            count = int(self.rng.integers(low, high + 1))
            picked = sorted(int(i) for i in self.rng.choice(len(cfg.waves), size=count, replace=False))
            symbols = [cfg.waves[i] for i in picked]
            periods = {}
            for symbol in symbols:
                lo, hi = waveform_for(lookup_wave(symbol)).period_range()
                periods[symbol] = float(self.rng.uniform(lo, hi))

            for stay in stays:
                self._numerics(stay)
                self._enumerations(stay)
                self._alerts(stay)
                expected = self._waves(stay, symbols, periods)
                if self.rng.random() < cfg.device_log_fraction:
                    self.rows["device_logs"].append({
                        "encounter_id": patient.visit_id, "bed_label": device_bed_label(stay.bed),
                        "attach_at": self._ts(stay.start), "detach_at": self._ts(stay.end),
                    })
                segments.append(TrueSegment(
                    monitor_patient_id=stay.monitor_patient_id,
                    device_bed_label=device_bed_label(stay.bed),
                    bed_label=emr_bed_label(stay.bed),
                    mrn=patient.mrn,
                    visit_id=patient.visit_id,
                    start=self._ts(stay.start),
                    end=self._ts(stay.end),
                    data_start=self._ts(stay.data_start),
                    data_end=self._ts(stay.data_end),
                    lifetime_id_present=stay.lifetime_id_present,
                    waves=expected,
                ))
                planned_stays.append(PlannedStay(patient.name, patient.mrn, patient.visit_id,
                                                 emr_bed_label(stay.bed), stay.start, stay.end))

            if self.rng.random() >= cfg.adt_missing_fraction:
                events.extend(self._adt(stays))

        injector = AdtNoiseInjector(cfg.adt_noise, self.rng, cfg.readmit_gap_seconds)
        recorded = {e.visit_id for e in events}
        noisy = injector.inject(events, [s for s in planned_stays if s.visit_id in recorded],
                                [emr_bed_label(b) for b in range(cfg.beds)])
        self.rows["adt_events"] = event_rows(noisy, self.day_start)

        truth = GroundTruth(
            day=self.day,
            patients=patients,
            segments=sorted(segments, key=lambda s: (s.start, s.study_id)),
            row_counts={table: len(rows) for table, rows in self.rows.items()},
            noise=injector.get_statistics(),
        )
        return truth, self.rows


def _write_table(path: Path, table: str, rows: List[Dict[str, Any]]) -> None:
    columns = TABLE_COLUMNS[table]
    frame = pd.DataFrame(
        [{c: format_ts(v) if isinstance(v, pd.Timestamp) else v for c, v in row.items()} for row in rows],
        columns=columns,
    )
    frame.to_csv(path, index=False, lineterminator="\n")


def generate_day(config: ScenarioConfig, day: date, out_root: Path) -> Tuple[Path, GroundTruth]:
    """
    Write the bundle for ``day`` as ``out_root/YYYY-MM-DD/`` and its ground
    truth as ``out_root/YYYY-MM-DD.truth.json``.
    """
    truth, rows = _DayBuilder(config, day).build()
    bundle_dir = out_root / day.isoformat()
    _, day_end = day_bounds(day)
    created_at = day_end + pd.Timedelta(minutes=5)

    with staged_directory(bundle_dir) as staging:
        for table in TABLES:
            _write_table(staging / table_file(table), table, rows[table])
        counts = pd.DataFrame([(table, truth.row_counts[table]) for table in TABLES], columns=COUNTS_COLUMNS)
        counts.to_csv(staging / COUNTS_FILE, index=False, lineterminator="\n")
        names = sorted([table_file(table) for table in TABLES] + [COUNTS_FILE])
        write_manifest(staging / MANIFEST_FILE, build_manifest(staging, names, created_at))

    write_json(truth_path(out_root, day), truth.to_dict())
    logger.info("generated %s: %d patients, %d stays", day.isoformat(), len(truth.patients), len(truth.segments))
    return bundle_dir, truth


def generate_corpus(config: ScenarioConfig, out_root: Path) -> List[Tuple[Path, GroundTruth]]:
    return [generate_day(config, day, out_root) for day in config.day_list]


def merge_expected_stats(truths: List[GroundTruth]) -> Dict[str, Any]:
    """Expected catalog figures over several days."""
    patients: Set[str] = set()
    per_wave: Dict[str, Dict[str, Any]] = {}
    studies = 0
    for truth in truths:
        studies += len(truth.segments)
        for segment in truth.segments:
            patients.add(segment.mrn)
            for symbol, n_samples in segment.waves.items():
                entry = per_wave.setdefault(symbol, {"patients": set(), "studies": 0, "n_samples": 0})
                entry["patients"].add(segment.mrn)
                entry["studies"] += 1
                entry["n_samples"] += n_samples
    return {
        "days": len(truths),
        "studies": studies,
        "patients": len(patients),
        "per_wave": {
            symbol: {"patients": len(v["patients"]), "studies": v["studies"], "n_samples": v["n_samples"]}
            for symbol, v in sorted(per_wave.items())
        },
    }
