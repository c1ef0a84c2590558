"""Catalog tables: row types, column layouts and partition reading."""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from ..utils.errors import ConfigError
from ..utils.utils import format_ts, utc

STUDY_MAP = "study_map"
STUDY_DETAILS = "study_details"
WAVEFORM_MANIFEST = "waveform_manifest"
CATALOG_TABLES = [STUDY_MAP, STUDY_DETAILS, WAVEFORM_MANIFEST]

PART_FILE = "part.csv"
UNASSIGNED_UNIT = "UNASSIGNED"

DETAIL_COLUMNS = ["study_id", "symbol", "unit", "rate", "n_samples", "file", "size_bytes"]
_INT_COLUMNS = ["rate", "n_samples", "size_bytes"]


class CatalogKind(str, Enum):
    IDENTIFIED = "identified"
    DEID = "deid"

    @property
    def patient_column(self) -> str:
        return "mrn" if self is CatalogKind.IDENTIFIED else "pseudo_id"

    @property
    def partition_key(self) -> str:
        return "day" if self is CatalogKind.IDENTIFIED else "batch"


def map_columns(kind: CatalogKind) -> List[str]:
    identity = ["mrn", "monitor_patient_id"] if kind is CatalogKind.IDENTIFIED else ["pseudo_id"]
    return ["study_id", *identity, "lifetime_id_source", "bed", "clinical_unit",
            "start", "end", "storage_path", "linkage_method"]


def manifest_columns(kind: CatalogKind) -> List[str]:
    return [kind.partition_key, "zip", "size_bytes", "sha256"]


def table_columns(kind: CatalogKind, table: str) -> List[str]:
    if table == STUDY_MAP:
        return map_columns(kind)
    if table == STUDY_DETAILS:
        return list(DETAIL_COLUMNS)
    if table == WAVEFORM_MANIFEST:
        return manifest_columns(kind)
    raise ValueError(f"unknown catalog table {table!r}")


def partition_name(kind: CatalogKind, value: str) -> str:
    return f"{kind.partition_key}={value}"


def partition_dir(catalog_dir: Path, kind: CatalogKind, table: str, partition: str) -> Path:
    return catalog_dir / kind.value / table / partition


@dataclass(frozen=True)
class StudyMapRow:
    study_id: str
    bed: str
    clinical_unit: str
    start: pd.Timestamp
    end: pd.Timestamp
    storage_path: str
    linkage_method: str
    lifetime_id_source: bool = False
    mrn: Optional[str] = None
    pseudo_id: Optional[str] = None
    monitor_patient_id: Optional[str] = None

    @property
    def patient_key(self) -> Optional[str]:
        return self.mrn if self.mrn is not None else self.pseudo_id

    def to_row(self, kind: CatalogKind) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "study_id": self.study_id,
            "lifetime_id_source": "true" if self.lifetime_id_source else "false",
            "bed": self.bed,
            "clinical_unit": self.clinical_unit,
            "start": format_ts(self.start),
            "end": format_ts(self.end),
            "storage_path": self.storage_path,
            "linkage_method": self.linkage_method,
        }
        if kind is CatalogKind.IDENTIFIED:
            row["mrn"] = self.mrn or ""
            row["monitor_patient_id"] = self.monitor_patient_id or ""
        else:
            row["pseudo_id"] = self.pseudo_id or ""
        return {column: row[column] for column in map_columns(kind)}

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> 'StudyMapRow':
        def optional(name: str) -> Optional[str]:
            value = record.get(name)
            return str(value) if value else None

        return cls(
            study_id=str(record["study_id"]),
            bed=str(record["bed"]),
            clinical_unit=str(record["clinical_unit"]),
            start=utc(record["start"]),
            end=utc(record["end"]),
            storage_path=str(record["storage_path"]),
            linkage_method=str(record["linkage_method"]),
            lifetime_id_source=bool(record["lifetime_id_source"]),
            mrn=optional("mrn"),
            pseudo_id=optional("pseudo_id"),
            monitor_patient_id=optional("monitor_patient_id"),
        )


@dataclass(frozen=True)
class StudyDetailRow:
    study_id: str
    symbol: str
    unit: str
    rate: int
    n_samples: int
    file: str
    size_bytes: int

    def to_row(self) -> Dict[str, Any]:
        return {column: getattr(self, column) for column in DETAIL_COLUMNS}


@dataclass(frozen=True)
class WaveformManifestRow:
    partition_value: str
    zip: str
    size_bytes: int
    sha256: str

    def to_row(self, kind: CatalogKind) -> Dict[str, Any]:
        return {kind.partition_key: self.partition_value, "zip": self.zip,
                "size_bytes": self.size_bytes, "sha256": self.sha256}


@dataclass(frozen=True)
class BedUnitMap:
    """EMR bed -> clinical unit; beds not listed fall into UNASSIGNED."""

    units: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_csv(cls, path: Optional[Path]) -> 'BedUnitMap':
        if path is None:
            return cls()
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        if list(frame.columns) != ["bed", "unit"]:
            raise ConfigError(f"{path}: header must be bed,unit")
        duplicated = frame["bed"].duplicated()
        if duplicated.any():
            raise ConfigError(f"{path}: bed {frame['bed'][duplicated].iloc[0]!r} listed twice")
        return cls(units=dict(zip(frame["bed"], frame["unit"])))

    def unit_of(self, bed: str) -> str:
        return self.units.get(bed) or UNASSIGNED_UNIT


def list_partitions(catalog_dir: Path, kind: CatalogKind, table: str) -> List[str]:
    root = catalog_dir / kind.value / table
    if not root.is_dir():
        return []
    return sorted(p.name for p in root.iterdir()
                  if p.is_dir() and p.name.startswith(f"{kind.partition_key}=") and (p / PART_FILE).is_file())


def read_table(catalog_dir: Path, kind: CatalogKind, table: str) -> pd.DataFrame:
    """
    All published partitions of one table, typed, with a ``partition``
    column holding the partition value.
    """
    columns = table_columns(kind, table)
    frames = []
    for name in list_partitions(catalog_dir, kind, table):
        part = pd.read_csv(partition_dir(catalog_dir, kind, table, name) / PART_FILE,
                           dtype=str, keep_default_na=False)
        part["partition"] = name.split("=", 1)[1]
        frames.append(part)
    if not frames:
        return pd.DataFrame({column: pd.Series(dtype=object) for column in [*columns, "partition"]})

    frame = pd.concat(frames, ignore_index=True)
    for column in _INT_COLUMNS:
        if column in frame.columns:
            frame[column] = frame[column].astype("int64")
    if table == STUDY_MAP:
        frame["start"] = pd.to_datetime(frame["start"], utc=True, format="ISO8601")
        frame["end"] = pd.to_datetime(frame["end"], utc=True, format="ISO8601")
        frame["lifetime_id_source"] = frame["lifetime_id_source"] == "true"
    return frame
