"""Cohort-style filtering over a published catalog, and referential checks."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..extract.waves import lookup_wave
from ..utils.utils import utc
from .tables import STUDY_DETAILS, STUDY_MAP, WAVEFORM_MANIFEST, CatalogKind, StudyMapRow, read_table


@dataclass(frozen=True)
class StudyFilter:
    """
    Conjunctive study filter. ``patients`` matches the catalog's patient
    column (MRN in the identified catalog, pseudo id in the deid one).
    ``time_range`` keeps studies overlapping ``[from, to)``. A study passes
    ``wave_symbols`` only when it holds every listed wave.
    """

    patients: Optional[Sequence[str]] = None
    beds: Optional[Sequence[str]] = None
    units: Optional[Sequence[str]] = None
    time_range: Optional[Tuple[pd.Timestamp, pd.Timestamp]] = None
    wave_symbols: Optional[Sequence[str]] = None

    def __post_init__(self) -> None:
        for symbol in self.wave_symbols or ():
            lookup_wave(symbol)
        if self.time_range is not None and not utc(self.time_range[0]) < utc(self.time_range[1]):
            raise ValueError("time range must be non-empty")


def query_frame(catalog_dir: Path, study_filter: StudyFilter,
                kind: CatalogKind = CatalogKind.IDENTIFIED) -> pd.DataFrame:
    studies = read_table(catalog_dir, kind, STUDY_MAP)
    mask = pd.Series(True, index=studies.index)
    if study_filter.patients is not None:
        mask &= studies[kind.patient_column].isin(list(study_filter.patients))
    if study_filter.beds is not None:
        mask &= studies["bed"].isin(list(study_filter.beds))
    if study_filter.units is not None:
        mask &= studies["clinical_unit"].isin(list(study_filter.units))
    if study_filter.time_range is not None and not studies.empty:
        lo, hi = (utc(t) for t in study_filter.time_range)
        mask &= (studies["start"] < hi) & (studies["end"] > lo)
    if study_filter.wave_symbols:
        details = read_table(catalog_dir, kind, STUDY_DETAILS)
        wanted = set(study_filter.wave_symbols)
        held = details[details["symbol"].isin(list(wanted))].groupby("study_id")["symbol"].nunique()
        complete = set(held[held == len(wanted)].index)
        mask &= studies["study_id"].isin(list(complete))

    selected = studies[mask]
    if selected.empty:
        return selected.drop(columns=["partition"])
    selected = selected.assign(_start_ns=selected["start"].map(lambda t: t.value))
    selected = selected.sort_values(["_start_ns", "study_id"], kind="mergesort")
    return selected.drop(columns=["partition", "_start_ns"]).reset_index(drop=True)


def query_studies(catalog_dir: Path, study_filter: StudyFilter,
                  kind: CatalogKind = CatalogKind.IDENTIFIED) -> List[StudyMapRow]:
    """Matching studies ordered by (start, study_id)."""
    frame = query_frame(catalog_dir, study_filter, kind)
    return [StudyMapRow.from_record(record) for record in frame.to_dict("records")]


@dataclass
class IntegrityReport:
    orphan_details: List[str] = field(default_factory=list)
    orphan_manifest: List[str] = field(default_factory=list)
    unmanifested_studies: List[str] = field(default_factory=list)
    duplicate_studies: List[str] = field(default_factory=list)
    duplicate_details: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.orphan_details or self.orphan_manifest or self.unmanifested_studies
                    or self.duplicate_studies or self.duplicate_details)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "orphan_details": self.orphan_details,
            "orphan_manifest": self.orphan_manifest,
            "unmanifested_studies": self.unmanifested_studies,
            "duplicate_studies": self.duplicate_studies,
            "duplicate_details": [list(pair) for pair in self.duplicate_details],
        }


def check_integrity(catalog_dir: Path, kind: CatalogKind = CatalogKind.IDENTIFIED) -> IntegrityReport:
    studies = read_table(catalog_dir, kind, STUDY_MAP)
    details = read_table(catalog_dir, kind, STUDY_DETAILS)
    manifest = read_table(catalog_dir, kind, WAVEFORM_MANIFEST)

    ids = set(studies["study_id"])
    zips = {Path(p).name for p in studies["storage_path"]}
    listed = set(manifest["zip"])
    duplicated = details.duplicated(["study_id", "symbol"])
    return IntegrityReport(
        orphan_details=sorted(set(details["study_id"]) - ids),
        orphan_manifest=sorted(listed - zips),
        unmanifested_studies=sorted(zips - listed),
        duplicate_studies=sorted(set(studies["study_id"][studies["study_id"].duplicated()])),
        duplicate_details=sorted(set(zip(details["study_id"][duplicated], details["symbol"][duplicated]))),
    )
