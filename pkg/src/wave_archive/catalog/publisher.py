"""Day-partitioned publishing of the three catalog tables."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from ..signals.study_folder import PackedStudy
from ..utils.errors import PartialDay
from ..utils.utils import atomic_write_text, file_lock
from .tables import (
    CATALOG_TABLES,
    PART_FILE,
    STUDY_DETAILS,
    STUDY_MAP,
    WAVEFORM_MANIFEST,
    CatalogKind,
    StudyDetailRow,
    StudyMapRow,
    WaveformManifestRow,
    partition_dir,
    partition_name,
    table_columns,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CatalogEntry:
    """One study as it enters a catalog: its map row, wave rows and zip."""

    study: StudyMapRow
    details: List[StudyDetailRow] = field(default_factory=list)
    pack: Optional[PackedStudy] = None


def detail_rows(study_id: str, details: Dict[str, Any]) -> List[StudyDetailRow]:
    """Study detail rows from a folder's ``study_details.json`` content."""
    return [
        StudyDetailRow(study_id=study_id, symbol=w["symbol"], unit=w["unit"], rate=int(w["rate"]),
                       n_samples=int(w["n_samples"]), file=w["file"], size_bytes=int(w["size_bytes"]))
        for w in details.get("waves", [])
    ]


def _check_packed(entries: Sequence[CatalogEntry], storage_root: Path) -> None:
    unpacked = []
    for entry in entries:
        if entry.pack is None or not (storage_root / entry.study.storage_path).is_file():
            unpacked.append(entry.study.study_id)
    if unpacked:
        raise PartialDay(f"{len(unpacked)} of {len(entries)} studies are not packed, first {unpacked[0]}")
    ids = [e.study.study_id for e in entries]
    if len(set(ids)) != len(ids):
        raise PartialDay("duplicate study ids in one partition")


def _table_csv(columns: List[str], rows: List[Dict[str, Any]], sort_by: List[str]) -> str:
    frame = pd.DataFrame(rows, columns=columns)
    if sort_by and not frame.empty:
        frame = frame.sort_values(sort_by, kind="mergesort")
    return frame.to_csv(index=False, lineterminator="\n")


def publish_day(catalog_dir: Path, kind: CatalogKind, partition_value: str,
                entries: Sequence[CatalogEntry], storage_root: Path) -> Dict[str, Path]:
    """
    Write the ``study_map``, ``study_details`` and ``waveform_manifest``
    partitions for one day (or one deid batch).

    Publishing the same entries again writes the same bytes. A day with no
    studies still gets three header-only partitions.
    """
    _check_packed(entries, storage_root)
    partition = partition_name(kind, partition_value)

    ordered = sorted(entries, key=lambda e: (e.study.start.value, e.study.study_id))
    map_rows = [e.study.to_row(kind) for e in ordered]
    detail = [d.to_row() for e in entries for d in e.details]
    manifest = [
        WaveformManifestRow(partition_value=partition_value, zip=e.pack.zip_path.name,
                            size_bytes=e.pack.size_bytes, sha256=e.pack.sha256).to_row(kind)
        for e in entries if e.pack is not None
    ]
    texts = {
        STUDY_MAP: _table_csv(table_columns(kind, STUDY_MAP), map_rows, []),
        STUDY_DETAILS: _table_csv(table_columns(kind, STUDY_DETAILS), detail, ["study_id", "symbol"]),
        WAVEFORM_MANIFEST: _table_csv(table_columns(kind, WAVEFORM_MANIFEST), manifest, ["zip"]),
    }

    written: Dict[str, Path] = {}
    lock = catalog_dir / kind.value / ".locks" / f"{partition}.lock"
    with file_lock(lock):
        for table in CATALOG_TABLES:
            path = partition_dir(catalog_dir, kind, table, partition) / PART_FILE
            atomic_write_text(path, texts[table])
            written[table] = path
    logger.info("published %s partition %s with %d studies", kind.value, partition, len(entries))
    return written
