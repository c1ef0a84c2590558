"""Bundle manifests: parsing, writing and size/checksum verification."""

import csv
import re
from dataclasses import dataclass
from datetime import date
from pathlib import Path, PurePosixPath
from typing import List, Optional, Sequence

import pandas as pd

from ..utils.errors import IntegrityFailure, MalformedManifest
from ..utils.utils import format_ts, parse_day, sha256_file
from .schema import COUNTS_FILE, MANIFEST_COLUMNS, MANIFEST_FILE, TABLES, ManifestEntry, table_file

_SHA256_RE = re.compile(r"^[0-9a-f]{64}$")


@dataclass(frozen=True)
class VerifiedBundle:
    root: Path
    day: date
    manifest: List[ManifestEntry]

    def path_of(self, file_name: str) -> Path:
        return self.root.joinpath(*PurePosixPath(file_name).parts)

    def has_file(self, file_name: str) -> bool:
        return any(entry.file_name == file_name for entry in self.manifest)


def _check_file_name(file_name: str, row: int) -> None:
    posix = PurePosixPath(file_name)
    if not file_name or "\\" in file_name or posix.is_absolute():
        raise MalformedManifest(f"row {row}: unsafe file name {file_name!r}")
    if any(part in ("", ".", "..") for part in posix.parts):
        raise MalformedManifest(f"row {row}: unsafe file name {file_name!r}")


def parse_manifest(path: Path) -> List[ManifestEntry]:
    """Read ``manifest.csv``; entries keep file order."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != MANIFEST_COLUMNS:
        raise MalformedManifest(f"{path}: header must be {','.join(MANIFEST_COLUMNS)}")

    entries: List[ManifestEntry] = []
    seen: set[str] = set()
    for number, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(MANIFEST_COLUMNS):
            raise MalformedManifest(f"row {number}: expected {len(MANIFEST_COLUMNS)} columns, got {len(row)}")
        file_name, created_at, size_text, checksum = row
        _check_file_name(file_name, number)
        if file_name in seen:
            raise MalformedManifest(f"row {number}: duplicate file_name {file_name!r}")
        seen.add(file_name)
        if not _SHA256_RE.match(checksum):
            raise MalformedManifest(f"row {number}: sha256 must be 64 lowercase hex characters")
        try:
            size_bytes = int(size_text)
        except ValueError:
            raise MalformedManifest(f"row {number}: size_bytes {size_text!r} is not an integer") from None
        if size_bytes < 0:
            raise MalformedManifest(f"row {number}: negative size_bytes")
        try:
            created = pd.Timestamp(created_at)
        except ValueError:
            raise MalformedManifest(f"row {number}: bad created_at {created_at!r}") from None
        created = created.tz_localize("UTC") if created.tzinfo is None else created.tz_convert("UTC")
        entries.append(ManifestEntry(file_name, created, size_bytes, checksum))
    return entries


def build_manifest(bundle_dir: Path, file_names: Sequence[str], created_at: pd.Timestamp) -> List[ManifestEntry]:
    return [
        ManifestEntry(
            file_name=name,
            created_at=created_at,
            size_bytes=(bundle_dir / name).stat().st_size,
            checksum=sha256_file(bundle_dir / name),
        )
        for name in file_names
    ]


def write_manifest(path: Path, entries: Sequence[ManifestEntry]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for entry in entries:
            writer.writerow([entry.file_name, format_ts(entry.created_at), entry.size_bytes, entry.checksum])


def verify_bundle(bundle_dir: Path, day: Optional[date] = None) -> VerifiedBundle:
    """
    Verify every manifest entry against the file on disk.

    Raises IntegrityFailure naming the first offending file, in manifest
    order, then unlisted table files, then extra files.
    """
    bundle_dir = Path(bundle_dir)
    if day is None:
        try:
            day = parse_day(bundle_dir.name)
        except ValueError:
            raise IntegrityFailure("layout", bundle_dir.name, "bundle directory must be named YYYY-MM-DD") from None

    manifest_path = bundle_dir / MANIFEST_FILE
    if not manifest_path.is_file():
        raise IntegrityFailure("missing", MANIFEST_FILE)
    entries = parse_manifest(manifest_path)
    bundle = VerifiedBundle(root=bundle_dir, day=day, manifest=entries)

    for entry in entries:
        path = bundle.path_of(entry.file_name)
        if not path.is_file():
            raise IntegrityFailure("missing", entry.file_name)
        size = path.stat().st_size
        if size != entry.size_bytes:
            raise IntegrityFailure("size", entry.file_name, f"expected {entry.size_bytes} bytes, found {size}")
        if sha256_file(path) != entry.checksum:
            raise IntegrityFailure("checksum", entry.file_name)

    listed = {entry.file_name for entry in entries}
    for table in TABLES:
        if table_file(table) not in listed:
            raise IntegrityFailure("unlisted", table_file(table))

    for path in sorted(p for p in bundle_dir.rglob("*") if p.is_file()):
        rel = path.relative_to(bundle_dir).as_posix()
        if rel != MANIFEST_FILE and rel not in listed:
            raise IntegrityFailure("extra", rel)

    return bundle


def counts_listed(bundle: VerifiedBundle) -> bool:
    return bundle.has_file(COUNTS_FILE)
