"""Study folders: signal records plus CSV sidecars, details descriptor and deterministic zip."""

import logging
import os
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import pandas as pd

from ..extract.waves import lookup_wave
from ..segmentation.filler import Study
from ..utils.errors import IncompleteStudyFolder, IntegrityFailure, UnwritableOutput
from ..utils.utils import TMP_PREFIX, format_ts, read_json, sha256_file, write_json
from .records import SignalRecord, write_record

logger = logging.getLogger(__name__)

DETAILS_FILE = "study_details.json"
ZIP_TIMESTAMP = (1980, 1, 1, 0, 0, 0)

# sidecar name -> (columns written, timestamp column)
SIDECARS: Dict[str, tuple[List[str], str]] = {
    "numerics": (["observed_at", "metric", "value", "unit"], "observed_at"),
    "alerts": (["at", "severity", "text"], "at"),
    "enumerations": (["observed_at", "label", "value"], "observed_at"),
}


@dataclass(frozen=True)
class StudyFolder:
    path: Path
    study_id: str
    details: Dict[str, Any]
    records: List[SignalRecord] = field(default_factory=list)


@dataclass(frozen=True)
class PackedStudy:
    study_id: str
    zip_path: Path
    size_bytes: int
    sha256: str

    def to_dict(self) -> Dict[str, Any]:
        return {"study_id": self.study_id, "zip": self.zip_path.name,
                "size_bytes": self.size_bytes, "sha256": self.sha256}


def write_sidecar(frame: pd.DataFrame, name: str, path: Path) -> int:
    """Write a sidecar CSV without identity columns, time-ordered."""
    columns, time_column = SIDECARS[name]
    if frame.empty:
        out = pd.DataFrame(columns=columns)
    else:
        out = frame[columns].copy()
        out = out.sort_values(columns, kind="mergesort")
        out[time_column] = [format_ts(t) for t in out[time_column]]
    out.to_csv(path, index=False, lineterminator="\n")
    return len(out)


def write_study_folder(study: Study, folder: Path) -> StudyFolder:
    """
    Write every wave record, the numerics/alerts/enumerations sidecars and
    ``study_details.json`` into ``folder``.
    """
    try:
        folder.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise UnwritableOutput(f"cannot create {folder}: {e}") from e

    records: List[SignalRecord] = []
    for symbol in sorted(study.waves):
        record = write_record(study.study_id, lookup_wave(symbol), study.waves[symbol], folder)
        if record is not None:
            records.append(record)

    rows = {name: write_sidecar(getattr(study, name), name, folder / f"{name}.csv") for name in SIDECARS}
    skeleton = study.skeleton
    details: Dict[str, Any] = {
        "study_id": study.study_id,
        "mrn_present": skeleton.mrn is not None,
        "bed": skeleton.bed_label,
        "start": format_ts(skeleton.start),
        "end": format_ts(skeleton.end),
        "linkage_method": skeleton.linkage_method.value,
        "waves": [
            {
                "symbol": r.wave.symbol,
                "unit": r.wave.unit,
                "rate": r.sample_rate,
                "n_samples": r.n_samples,
                "file": r.file_name,
                "size_bytes": r.size_bytes,
            }
            for r in records
        ],
        "numerics_rows": rows["numerics"],
        "alert_rows": rows["alerts"],
        "enumeration_rows": rows["enumerations"],
    }
    write_json(folder / DETAILS_FILE, details)
    return StudyFolder(path=folder, study_id=study.study_id, details=details, records=records)


def _check_complete(folder: Path) -> Dict[str, Any]:
    details_path = folder / DETAILS_FILE
    if not details_path.is_file():
        raise IncompleteStudyFolder(f"{folder.name}: {DETAILS_FILE} is missing")
    details = read_json(details_path)
    for wave in details.get("waves", []):
        dat = folder / wave["file"]
        hea = dat.with_suffix(".hea")
        if not dat.is_file() or not hea.is_file():
            raise IncompleteStudyFolder(f"{folder.name}: record {dat.stem} is incomplete")
    for name in SIDECARS:
        if not (folder / f"{name}.csv").is_file():
            raise IncompleteStudyFolder(f"{folder.name}: {name}.csv is missing")
    return details


def pack_study(folder: Path) -> PackedStudy:
    """
    Zip a complete study folder next to it as ``<folder name>.zip``.

    Entries are sorted and carry fixed timestamps and permissions, so packing
    the same folder twice gives the same bytes.
    """
    _check_complete(folder)
    zip_path = folder.parent / f"{folder.name}.zip"
    staging = folder.parent / f"{TMP_PREFIX}{folder.name}.zip.{os.getpid()}"
    files = sorted(p for p in folder.rglob("*") if p.is_file())
    with zipfile.ZipFile(staging, "w") as archive:
        for path in files:
            info = zipfile.ZipInfo(f"{folder.name}/{path.relative_to(folder).as_posix()}", date_time=ZIP_TIMESTAMP)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.create_system = 3
            info.external_attr = 0o644 << 16
            archive.writestr(info, path.read_bytes(), compresslevel=6)
    os.replace(staging, zip_path)
    return PackedStudy(study_id=folder.name, zip_path=zip_path, size_bytes=zip_path.stat().st_size,
                       sha256=sha256_file(zip_path))


def verify_pack(zip_path: Path, size_bytes: int, sha256: str) -> None:
    """Raise IntegrityFailure unless the zip on disk has the recorded size and digest."""
    if not zip_path.is_file():
        raise IntegrityFailure("missing", zip_path.name)
    size = zip_path.stat().st_size
    if size != size_bytes:
        raise IntegrityFailure("size", zip_path.name, f"expected {size_bytes} bytes, found {size}")
    if sha256_file(zip_path) != sha256:
        raise IntegrityFailure("checksum", zip_path.name)
