"""Parsing of a verified bundle into typed, day-checked tables."""

import csv
import logging
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ..utils.errors import OutOfDayTimestamp, SchemaViolation, UnknownWaveSymbol
from ..utils.utils import NS_PER_SECOND, day_bounds, format_ts, samples_duration_ns, to_ns
from .manifest import VerifiedBundle, counts_listed
from .schema import (
    COUNTS_COLUMNS,
    COUNTS_FILE,
    END_COLUMNS,
    POINT_COLUMNS,
    TABLE_COLUMNS,
    TABLES,
    AdtEventKind,
    AlertSeverity,
    CountReport,
    ExtractBundle,
    TableCount,
    table_file,
)
from .waves import lookup_wave

logger = logging.getLogger(__name__)

# A wave block is one CSV field; the stdlib default limit is far too small.
csv.field_size_limit(2**31 - 1)

_SEVERITIES = {s.value for s in AlertSeverity}
_EVENTS = {e.value for e in AdtEventKind}


def _read_rows(path: Path, table: str) -> List[List[str]]:
    columns = TABLE_COLUMNS[table]
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != columns:
            raise SchemaViolation(table, f"header must be {','.join(columns)}, got {header}")
        rows: List[List[str]] = []
        for number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(columns):
                raise SchemaViolation(table, f"expected {len(columns)} columns, got {len(row)}", row=number)
            rows.append(row)
    return rows


def _first_bad(mask: np.ndarray) -> int:
    """CSV line number of the first True in ``mask`` (header is line 1)."""
    return int(np.argmax(mask)) + 2


def _timestamps(frame: pd.DataFrame, table: str, column: str) -> pd.Series:
    try:
        values = pd.to_datetime(frame[column], utc=True, format="ISO8601")
    except (ValueError, TypeError) as e:
        raise SchemaViolation(table, f"{column}: unparseable timestamp ({e})") from None
    missing = values.isna().to_numpy()
    if missing.any():
        raise SchemaViolation(table, f"{column} is empty", row=_first_bad(missing))
    return values


def _numbers(frame: pd.DataFrame, table: str, column: str) -> pd.Series:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna().to_numpy() & (frame[column].str.lower() != "nan").to_numpy()
    if bad.any():
        raise SchemaViolation(table, f"{column}: not a number", row=_first_bad(bad))
    return values.astype(float)


def _check_day(frame: pd.DataFrame, table: str, day: date) -> None:
    start, end = day_bounds(day)
    lo, hi = start.value, end.value
    for column in POINT_COLUMNS[table]:
        ns = to_ns(frame[column])
        bad = (ns < lo) | (ns >= hi)
        if bad.any():
            raise OutOfDayTimestamp(table, f"{column} outside {day.isoformat()}", row=_first_bad(bad))
    for column in END_COLUMNS.get(table, []):
        ns = to_ns(frame[column])
        bad = (ns <= lo) | (ns > hi)
        if bad.any():
            raise OutOfDayTimestamp(table, f"{column} outside {day.isoformat()}", row=_first_bad(bad))


def _parse_samples(text: str, row: int) -> np.ndarray:
    if not text:
        raise SchemaViolation("wave_samples", "empty sample block", row=row)
    try:
        return np.array(text.split(";"), dtype=np.float64)
    except ValueError:
        raise SchemaViolation("wave_samples", "samples must be ';'-separated decimals", row=row) from None


def _coerce_table(table: str, frame: pd.DataFrame, day: date) -> pd.DataFrame:
    """Convert a frame of CSV strings into typed columns and check its rows."""
    frame = frame.copy()

    for column in POINT_COLUMNS[table] + END_COLUMNS.get(table, []):
        frame[column] = _timestamps(frame, table, column)

    if "lifetime_id" in frame.columns:
        frame["lifetime_id"] = frame["lifetime_id"].fillna("").astype(str)
    for column in ("monitor_patient_id", "bed_label"):
        if column in frame.columns:
            empty = (frame[column] == "").to_numpy()
            if empty.any():
                raise SchemaViolation(table, f"{column} is empty", row=_first_bad(empty))

    if table == "numerics":
        frame["value"] = _numbers(frame, table, "value")
        fractional = to_ns(frame["observed_at"]) % NS_PER_SECOND != 0
        if fractional.any():
            raise SchemaViolation(table, "observed_at must have whole-second resolution",
                                  row=_first_bad(fractional))

    elif table == "wave_samples":
        rates = pd.to_numeric(frame["sample_rate"], errors="coerce")
        if rates.isna().any():
            raise SchemaViolation(table, "sample_rate is not an integer", row=_first_bad(rates.isna().to_numpy()))
        frame["sample_rate"] = rates.astype(np.int64)
        for offset, (symbol, rate) in enumerate(zip(frame["wave"], frame["sample_rate"])):
            try:
                kind = lookup_wave(symbol)
            except UnknownWaveSymbol as e:
                raise SchemaViolation(table, str(e), row=offset + 2) from None
            if int(rate) != kind.rate:
                raise SchemaViolation(table, f"{symbol} must be sampled at {kind.rate}/s, got {rate}",
                                      row=offset + 2)
        frame["samples"] = [_parse_samples(text, offset + 2) for offset, text in enumerate(frame["samples"])]
        # a block is a half-open interval; its end may touch the next midnight but not pass it
        ends = to_ns(frame["block_start"]) + np.array(
            [samples_duration_ns(len(s), int(r)) for s, r in zip(frame["samples"], frame["sample_rate"])],
            dtype=np.int64)
        late = ends > day_bounds(day)[1].value
        if late.any():
            raise OutOfDayTimestamp(table, f"wave block runs past the end of {day.isoformat()}",
                                    row=_first_bad(late))

    elif table == "enumerations":
        empty = (frame["label"] == "").to_numpy()
        if empty.any():
            raise SchemaViolation(table, "label is empty", row=_first_bad(empty))

    elif table == "alerts":
        bad = (~frame["severity"].isin(_SEVERITIES)).to_numpy()
        if bad.any():
            raise SchemaViolation(table, "severity must be red, yellow or technical", row=_first_bad(bad))
        empty = (frame["text"].str.strip() == "").to_numpy()
        if empty.any():
            raise SchemaViolation(table, "alert text is empty", row=_first_bad(empty))

    elif table == "device_logs":
        backwards = (to_ns(frame["attach_at"]) >= to_ns(frame["detach_at"]))
        if backwards.any():
            raise SchemaViolation(table, "attach_at must precede detach_at", row=_first_bad(backwards))

    elif table == "adt_events":
        ids = pd.to_numeric(frame["event_id"], errors="coerce")
        if ids.isna().any():
            raise SchemaViolation(table, "event_id is not an integer", row=_first_bad(ids.isna().to_numpy()))
        frame["event_id"] = ids.astype(np.int64)
        duplicated = frame["event_id"].duplicated().to_numpy()
        if duplicated.any():
            raise SchemaViolation(table, "duplicate event_id", row=_first_bad(duplicated))
        bad = (~frame["event"].isin(_EVENTS)).to_numpy()
        if bad.any():
            raise SchemaViolation(table, f"event must be one of {sorted(_EVENTS)}", row=_first_bad(bad))
        for column in ("mrn", "visit_id", "bed"):
            empty = (frame[column] == "").to_numpy()
            if empty.any():
                raise SchemaViolation(table, f"{column} is empty", row=_first_bad(empty))

    _check_day(frame, table, day)
    return frame.reset_index(drop=True)


def _read_counts(path: Path) -> Dict[str, int]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(frame.columns) != COUNTS_COLUMNS:
        raise SchemaViolation("counts", f"header must be {','.join(COUNTS_COLUMNS)}")
    declared: Dict[str, int] = {}
    for number, (table, rows) in enumerate(zip(frame["table"], frame["rows"]), start=2):
        if table not in TABLE_COLUMNS:
            raise SchemaViolation("counts", f"unknown table {table!r}", row=number)
        try:
            declared[table] = int(rows)
        except ValueError:
            raise SchemaViolation("counts", f"rows {rows!r} is not an integer", row=number) from None
    return declared


def parse_extract_day(bundle: VerifiedBundle) -> ExtractBundle:
    """
    Parse the six tables of a verified bundle.

    Timestamps become UTC; any point timestamp outside the bundle day raises
    OutOfDayTimestamp.
    """
    tables: Dict[str, pd.DataFrame] = {}
    for table in TABLES:
        rows = _read_rows(bundle.path_of(table_file(table)), table)
        frame = pd.DataFrame(rows, columns=TABLE_COLUMNS[table], dtype=object)
        tables[table] = _coerce_table(table, frame.astype(str) if rows else frame, bundle.day)

    declared = _read_counts(bundle.path_of(COUNTS_FILE)) if counts_listed(bundle) else None
    logger.debug("parsed bundle %s: %s", bundle.day.isoformat(),
                 {name: len(frame) for name, frame in tables.items()})
    return ExtractBundle(day=bundle.day, manifest=list(bundle.manifest), tables=tables, declared_counts=declared)


def validate_row_counts(bundle: ExtractBundle) -> CountReport:
    """Compare parsed row counts with ``counts.csv``; absent counts leave the verdict open."""
    declared = bundle.declared_counts
    return CountReport(tables={
        table: TableCount(
            declared=None if declared is None else declared.get(table),
            actual=len(bundle.tables[table]),
        )
        for table in TABLES
    })


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, pd.Timestamp):
        return format_ts(value)
    if isinstance(value, np.ndarray):
        return ";".join(f"{x:.4f}" for x in value)
    return str(value)


def bundle_from_rows(day: date, rows: Mapping[str, Sequence[Mapping[str, Any]]],
                     declared_counts: Optional[Dict[str, int]] = None) -> ExtractBundle:
    """Build a parsed bundle straight from row mappings, with the same checks as a file parse."""
    tables: Dict[str, pd.DataFrame] = {}
    for table in TABLES:
        columns = TABLE_COLUMNS[table]
        records = [[_cell(row.get(column)) for column in columns] for row in rows.get(table, [])]
        frame = pd.DataFrame(records, columns=columns, dtype=object)
        tables[table] = _coerce_table(table, frame.astype(str) if records else frame, day)
    return ExtractBundle(day=day, manifest=[], tables=tables, declared_counts=declared_counts)
