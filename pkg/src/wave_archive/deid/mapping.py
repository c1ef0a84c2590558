"""Keyed pseudonyms and per-patient date shifts, persisted as ``deid_map.csv``."""

import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Dict, Iterable, Iterator, Optional

import pandas as pd

from ..utils.errors import MapMissingEntry
from ..utils.utils import atomic_write_text, file_lock, keyed_digest

logger = logging.getLogger(__name__)

SHIFT_MIN_DAYS = 30
SHIFT_MAX_DAYS = 365
PSEUDO_ID_LENGTH = 12
MAP_COLUMNS = ["mrn", "pseudo_id", "shift_days"]


def derive_shift(mrn: str, secret_seed: str) -> int:
    """Whole-day shift in [30, 365], a keyed function of the MRN."""
    if not mrn or not secret_seed:
        raise ValueError("mrn and secret seed must be non-empty")
    digest = keyed_digest(secret_seed, "shift", mrn)
    span = SHIFT_MAX_DAYS - SHIFT_MIN_DAYS + 1
    return SHIFT_MIN_DAYS + int.from_bytes(digest[:8], "big") % span


def pseudonym(value: str, secret_seed: str, prefix: str, length: int = PSEUDO_ID_LENGTH) -> str:
    return prefix + keyed_digest(secret_seed, "pseudo", value).hex()[:length]


def batch_token(secret_seed: str, day: date) -> str:
    """Opaque partition name for a day in the de-identified tree."""
    return keyed_digest(secret_seed, "batch", day.isoformat()).hex()[:PSEUDO_ID_LENGTH]


@dataclass(frozen=True)
class DeidEntry:
    pseudo_id: str
    shift_days: int

    @property
    def shift(self) -> pd.Timedelta:
        return pd.Timedelta(days=self.shift_days)


class DeidMap:
    """
    MRN -> (pseudo id, shift). Entries are never recomputed once stored, so a
    patient keeps the same pseudonym and shift for the archive's lifetime.
    """

    def __init__(self, secret_seed: str, entries: Optional[Dict[str, DeidEntry]] = None):
        if not secret_seed:
            raise ValueError("secret seed must be non-empty")
        self._secret = secret_seed
        self._entries: Dict[str, DeidEntry] = dict(entries or {})

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, mrn: object) -> bool:
        return mrn in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._entries))

    @classmethod
    def load(cls, path: Path, secret_seed: str) -> 'DeidMap':
        if not path.exists():
            return cls(secret_seed)
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        if list(frame.columns) != MAP_COLUMNS:
            raise ValueError(f"{path}: header must be {','.join(MAP_COLUMNS)}")
        entries = {
            mrn: DeidEntry(pseudo_id=pseudo_id, shift_days=int(shift))
            for mrn, pseudo_id, shift in zip(frame["mrn"], frame["pseudo_id"], frame["shift_days"])
        }
        return cls(secret_seed, entries)

    def save(self, path: Path) -> None:
        frame = pd.DataFrame(
            [(mrn, e.pseudo_id, e.shift_days) for mrn, e in sorted(self._entries.items())],
            columns=MAP_COLUMNS,
        )
        atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))

    def ensure(self, mrn: str) -> DeidEntry:
        """Entry for ``mrn``, created on first sight."""
        existing = self._entries.get(mrn)
        if existing is not None:
            return existing
        taken = {e.pseudo_id for e in self._entries.values()}
        length = PSEUDO_ID_LENGTH
        pseudo_id = pseudonym(mrn, self._secret, "D", length)
        while pseudo_id in taken:
            length += 2
            pseudo_id = pseudonym(mrn, self._secret, "D", length)
        entry = DeidEntry(pseudo_id=pseudo_id, shift_days=derive_shift(mrn, self._secret))
        self._entries[mrn] = entry
        return entry

    def entry(self, mrn: str) -> DeidEntry:
        try:
            return self._entries[mrn]
        except KeyError:
            raise MapMissingEntry("MRN is not in the deid map") from None

    def unmatched_entry(self, monitor_patient_id: str) -> DeidEntry:
        """Identity for data stored without an MRN, derived from the monitor patient id."""
        token = pseudonym(monitor_patient_id, self._secret, "S")
        return DeidEntry(pseudo_id=token, shift_days=derive_shift(token, self._secret))

    def pseudo_ids(self) -> Iterable[str]:
        return (e.pseudo_id for e in self._entries.values())


def update_map(path: Path, secret_seed: str, mrns: Iterable[str]) -> DeidMap:
    """Add ``mrns`` to the persisted map under an exclusive lock; returns the updated map."""
    with file_lock(path.with_name(f"{path.name}.lock")):
        deid_map = DeidMap.load(path, secret_seed)
        before = len(deid_map)
        for mrn in sorted(set(mrns)):
            deid_map.ensure(mrn)
        if len(deid_map) != before or not path.exists():
            deid_map.save(path)
            logger.info("deid map now holds %d patients (%d new)", len(deid_map), len(deid_map) - before)
    return deid_map
