"""Shared builders for the test modules."""

import shutil
import tempfile
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from wave_archive.extract.bundle import bundle_from_rows
from wave_archive.extract.schema import AdtEvent, AdtEventKind, ExtractBundle
from wave_archive.synthgen import ScenarioConfig, write_bed_units
from wave_archive.utils.config import PipelineConfig
from wave_archive.utils.utils import utc

DAY = date(2021, 3, 1)
SEED = "unit-test-seed"


def ts(text: str) -> pd.Timestamp:
    """``HH:MM[:SS]`` on DAY, or a full ISO timestamp."""
    if "T" in text or "-" in text:
        return utc(text)
    return utc(f"{DAY.isoformat()}T{text}")


def small_scenario(seed: int = 1, **overrides: Any) -> ScenarioConfig:
    """A clean scenario small enough for end-to-end runs."""
    values: Dict[str, Any] = dict(
        patients_per_day=4,
        beds=3,
        waves=["II", "Pleth", "Resp"],
        waves_per_patient=(1, 2),
        stay_minutes=(30, 45),
        turnover_minutes=(5, 10),
        wave_block_interval_seconds=300,
        alerts_per_hour=4.0,
        name_in_alert_fraction=0.5,
    )
    values.update(overrides)
    return ScenarioConfig.clean(seed, **values)


class TempRoot:
    """A scratch directory with the four archive roots below it."""

    def __init__(self) -> None:
        self.path = Path(tempfile.mkdtemp(prefix="wave-archive-test-"))

    @property
    def extracts(self) -> Path:
        return self.path / "extracts"

    def config(self, scenario: Optional[ScenarioConfig] = None, **overrides: Any) -> PipelineConfig:
        bed_units = None
        if scenario is not None:
            bed_units = self.path / "bed_units.csv"
            write_bed_units(bed_units, scenario)
        values: Dict[str, Any] = dict(
            extracts_root=self.extracts,
            identified_root=self.path / "identified",
            deid_root=self.path / "deid",
            catalog_root=self.path / "catalog",
            deid_seed=SEED,
            bed_units_path=bed_units,
            worker_count=2,
            readmit_gap_seconds=300,
            visualization={"enabled": False},
        )
        values.update(overrides)
        return PipelineConfig(**values)

    def cleanup(self) -> None:
        shutil.rmtree(self.path, ignore_errors=True)


def numeric_rows(monitor_patient_id: str, bed_label: str, start: str, end: str, step_seconds: int = 60,
                 lifetime_id: str = "") -> List[Dict[str, Any]]:
    times = pd.date_range(ts(start), ts(end), freq=f"{step_seconds}s", inclusive="left")
    return [
        {"monitor_patient_id": monitor_patient_id, "lifetime_id": lifetime_id, "bed_label": bed_label,
         "observed_at": t, "metric": "HR", "value": "120.0", "unit": "/min"}
        for t in times
    ]


def wave_row(monitor_patient_id: str, bed_label: str, symbol: str, rate: int, start: str,
             samples: np.ndarray, lifetime_id: str = "") -> Dict[str, Any]:
    return {"monitor_patient_id": monitor_patient_id, "lifetime_id": lifetime_id, "bed_label": bed_label,
            "wave": symbol, "block_start": ts(start), "sample_rate": rate, "samples": samples}


def adt_rows(mrn: str, visit_id: str, name: str, chain: List[tuple]) -> List[Dict[str, Any]]:
    """``chain`` is a list of (event kind, bed, time) triples."""
    return [
        {"event_id": 0, "patient_name": name, "mrn": mrn, "visit_id": visit_id, "event": kind.value,
         "bed": bed, "at": ts(at)}
        for kind, bed, at in chain
    ]


def build_bundle(day: date = DAY, **tables: List[Dict[str, Any]]) -> ExtractBundle:
    """Parsed bundle from row lists; ADT event ids are numbered in order."""
    adt = [dict(row, event_id=i + 1) for i, row in enumerate(tables.pop("adt_events", []))]
    return bundle_from_rows(day, {**tables, "adt_events": adt})


def adt_event(event_id: int, kind: AdtEventKind, bed: str, at: str, mrn: str = "M1", visit_id: str = "1",
              name: str = "John Doe") -> AdtEvent:
    return AdtEvent(event_id=event_id, patient_name=name, mrn=mrn, visit_id=visit_id, event=kind, bed=bed,
                    at=ts(at))
