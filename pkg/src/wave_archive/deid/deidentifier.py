"""De-identified mirror of an identified study folder."""

import logging
import re
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Pattern, Sequence

import pandas as pd

from ..signals.records import renamed_header
from ..signals.study_folder import DETAILS_FILE, SIDECARS
from ..utils.utils import compact_ts, format_ts, read_json, staged_directory, utc, write_json
from .mapping import DeidEntry, DeidMap

logger = logging.getLogger(__name__)

REDACTED = "[REDACTED]"
MIN_NAME_TOKEN = 3

# sidecar columns that may carry free text
TEXT_COLUMNS = {"alerts": ["text"], "enumerations": ["label", "value"]}


@dataclass(frozen=True)
class StudyIdentity:
    study_id: str
    mrn: Optional[str]
    monitor_patient_id: str
    bed_label: str
    start: pd.Timestamp


def resolve_entry(identity: StudyIdentity, deid_map: DeidMap) -> DeidEntry:
    if identity.mrn is None:
        return deid_map.unmatched_entry(identity.monitor_patient_id)
    return deid_map.entry(identity.mrn)


def deid_study_id(identity: StudyIdentity, entry: DeidEntry) -> str:
    return f"{entry.pseudo_id}_{identity.bed_label}_{compact_ts(identity.start - entry.shift)}"


class Scrubber:
    """Replaces identifiers, and the words of patient names, in free text."""

    def __init__(self, deny_list: Sequence[str], names: Sequence[str] = ()):
        tokens = {t for t in deny_list if t} | {n for n in names if n}
        for value in names:
            tokens.update(word for word in re.split(r"\W+", value) if len(word) >= MIN_NAME_TOKEN)
        ordered = sorted(tokens, key=lambda t: (-len(t), t))
        self._pattern: Optional[Pattern[str]] = (
            re.compile("|".join(re.escape(t) for t in ordered), re.IGNORECASE) if ordered else None
        )

    def scrub(self, text: str) -> str:
        if self._pattern is None or not text:
            return text
        return self._pattern.sub(REDACTED, text)


def _shift_sidecar(source: Path, target: Path, name: str, shift: pd.Timedelta, scrubber: Scrubber) -> None:
    frame = pd.read_csv(source, dtype=str, keep_default_na=False)
    _, time_column = SIDECARS[name]
    if not frame.empty:
        frame[time_column] = [format_ts(utc(t) - shift) for t in frame[time_column]]
        for column in TEXT_COLUMNS.get(name, []):
            frame[column] = [scrubber.scrub(v) for v in frame[column]]
    frame.to_csv(target, index=False, lineterminator="\n")


def deidentify_study(folder: Path, identity: StudyIdentity, deid_map: DeidMap, out_root: Path,
                     deny_list: Sequence[str] = (), names: Sequence[str] = ()) -> Path:
    """
    Write the de-identified copy of ``folder`` under ``out_root``.

    Every timestamp moves back by the patient's whole-day shift; ids in
    names and descriptors become the pseudonym; free text is scrubbed
    against ``deny_list``. A folder that is already de-identified is
    returned unchanged.
    """
    details = read_json(folder / DETAILS_FILE)
    if details.get("deidentified"):
        return folder

    entry = resolve_entry(identity, deid_map)
    new_id = deid_study_id(identity, entry)
    scrubber = Scrubber(deny_list, names)
    target = out_root / new_id

    with staged_directory(target) as staging:
        waves: List[dict] = []
        for wave in details["waves"]:
            old_stem = Path(wave["file"]).stem
            new_stem = f"{new_id}_{wave['symbol']}"
            (staging / f"{new_stem}.hea").write_text(
                renamed_header(folder / f"{old_stem}.hea", new_stem, entry.shift), encoding="utf-8")
            shutil.copyfile(folder / wave["file"], staging / f"{new_stem}.dat")
            waves.append({**wave, "file": f"{new_stem}.dat"})

        for name in SIDECARS:
            _shift_sidecar(folder / f"{name}.csv", staging / f"{name}.csv", name, entry.shift, scrubber)

        shifted = {
            **details,
            "study_id": new_id,
            "pseudo_id": entry.pseudo_id,
            "start": format_ts(utc(details["start"]) - entry.shift),
            "end": format_ts(utc(details["end"]) - entry.shift),
            "waves": waves,
            "deidentified": True,
        }
        write_json(staging / DETAILS_FILE, shifted)

    logger.debug("de-identified study written as %s", new_id)
    return target
