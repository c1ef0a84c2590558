"""Archive summary: totals, daily averages, per-wave and unit x age tables."""

from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import pandas as pd

from ..extract.waves import WAVE_REGISTRY, registered_symbols
from .tables import STUDY_DETAILS, STUDY_MAP, WAVEFORM_MANIFEST, CatalogKind, list_partitions, read_table

AGE_GROUPS = ["neonate", "infant", "1-4", "5-9", "10-14", "15+"]
PER_WAVE_COLUMNS = ["symbol", "name", "unit", "rate", "patients", "studies", "n_samples", "size_bytes"]
NEONATE_MAX_DAYS = 28


def age_group(birth: date, at: date) -> str:
    """Age bucket: neonates up to 28 days, infants below one year, then by whole years."""
    if at < birth:
        raise ValueError("study starts before the birth date")
    if (at - birth).days <= NEONATE_MAX_DAYS:
        return "neonate"
    years = at.year - birth.year - ((at.month, at.day) < (birth.month, birth.day))
    if years < 1:
        return "infant"
    if years < 5:
        return "1-4"
    if years < 10:
        return "5-9"
    if years < 15:
        return "10-14"
    return "15+"


@dataclass
class ArchiveStats:
    days: int
    studies: int
    patients: int
    total_size_bytes: int
    daily: pd.DataFrame = field(repr=False)
    per_wave: pd.DataFrame = field(repr=False)
    unit_age: Optional[pd.DataFrame] = field(default=None, repr=False)

    @property
    def studies_per_day(self) -> float:
        return self.studies / self.days if self.days else 0.0

    @property
    def patients_per_day(self) -> float:
        return float(self.daily["patients"].mean()) if self.days else 0.0

    @property
    def size_per_day(self) -> float:
        return self.total_size_bytes / self.days if self.days else 0.0

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "days": self.days,
            "studies": self.studies,
            "patients": self.patients,
            "total_size_bytes": self.total_size_bytes,
            "studies_per_day": self.studies_per_day,
            "patients_per_day": self.patients_per_day,
            "size_per_day": self.size_per_day,
            "per_wave": self.per_wave.to_dict("records"),
        }
        if self.unit_age is not None:
            result["unit_age"] = self.unit_age.to_dict("records")
        return result


def _linked(studies: pd.DataFrame, kind: CatalogKind) -> pd.DataFrame:
    key = kind.patient_column
    return studies[(studies["linkage_method"] != "unmatched") & (studies[key] != "")]


def _per_wave(studies: pd.DataFrame, details: pd.DataFrame, kind: CatalogKind) -> pd.DataFrame:
    linked = _linked(studies, kind)[["study_id", kind.patient_column]]
    joined = details.merge(linked, on="study_id", how="left")
    rows: List[Dict[str, Any]] = []
    for symbol in registered_symbols():
        part = joined[joined["symbol"] == symbol]
        if part.empty:
            continue
        wave = WAVE_REGISTRY[symbol]
        rows.append({
            "symbol": symbol,
            "name": wave.name,
            "unit": wave.unit,
            "rate": wave.rate,
            "patients": int(part[kind.patient_column].dropna().nunique()),
            "studies": int(part["study_id"].nunique()),
            "n_samples": int(part["n_samples"].sum()),
            "size_bytes": int(part["size_bytes"].sum()),
        })
    return pd.DataFrame(rows, columns=PER_WAVE_COLUMNS)


def _unit_age(studies: pd.DataFrame, kind: CatalogKind, birthdates: Mapping[str, date]) -> pd.DataFrame:
    linked = _linked(studies, kind)
    key = kind.patient_column
    linked = linked[linked[key].isin(list(birthdates))]
    groups = [age_group(birthdates[p], start.date()) for p, start in zip(linked[key], linked["start"])]
    tagged = linked.assign(age_group=pd.Categorical(groups, categories=AGE_GROUPS, ordered=True))
    table = (tagged.groupby(["clinical_unit", "age_group"], observed=True)
             .agg(patients=(key, "nunique"), studies=("study_id", "nunique"))
             .reset_index())
    table["age_group"] = table["age_group"].astype(str)
    return table


def summarize(catalog_dir: Path, kind: CatalogKind = CatalogKind.IDENTIFIED,
              birthdates: Optional[Mapping[str, date]] = None) -> ArchiveStats:
    """
    Summarize a published catalog. ``birthdates`` maps the catalog's patient
    key to a birth date; without it the unit x age table is left out.
    """
    studies = read_table(catalog_dir, kind, STUDY_MAP)
    details = read_table(catalog_dir, kind, STUDY_DETAILS)
    manifest = read_table(catalog_dir, kind, WAVEFORM_MANIFEST)
    partitions = [name.split("=", 1)[1] for name in list_partitions(catalog_dir, kind, STUDY_MAP)]

    linked = _linked(studies, kind)
    daily = pd.DataFrame({
        "partition": partitions,
        "studies": [int((studies["partition"] == p).sum()) for p in partitions],
        "patients": [int(linked[linked["partition"] == p][kind.patient_column].nunique()) for p in partitions],
        "size_bytes": [int(manifest[manifest["partition"] == p]["size_bytes"].sum()) for p in partitions],
    })

    return ArchiveStats(
        days=len(partitions),
        studies=int(studies["study_id"].nunique()),
        patients=int(linked[kind.patient_column].nunique()),
        total_size_bytes=int(manifest["size_bytes"].sum()) if not manifest.empty else 0,
        daily=daily,
        per_wave=_per_wave(studies, details, kind),
        unit_age=_unit_age(studies, kind, birthdates) if birthdates is not None else None,
    )
