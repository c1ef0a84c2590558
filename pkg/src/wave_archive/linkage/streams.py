"""Collapse monitor observations into per-(patient id, bed) time ranges."""

from dataclasses import dataclass
from datetime import timedelta
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from ..extract.schema import ExtractBundle, MonitorPatientStream
from ..utils.utils import NS_PER_SECOND, from_ns, samples_duration_ns, to_ns

DEFAULT_MAX_GAP = timedelta(minutes=10)

RANGE_COLUMNS = ["monitor_patient_id", "bed_label", "lifetime_id", "start_ns", "end_ns"]


@dataclass(frozen=True)
class StreamRange:
    monitor_patient_id: str
    bed_label: str
    start: pd.Timestamp
    end: pd.Timestamp
    lifetime_id: Optional[str] = None

    @property
    def missing_lifetime_id(self) -> bool:
        return not self.lifetime_id


def collapse_frame(frame: pd.DataFrame, max_gap: Optional[timedelta] = DEFAULT_MAX_GAP) -> List[StreamRange]:
    """
    Vectorized core of ``collapse_stream_ranges``.

    ``frame`` has one row per observation with ``RANGE_COLUMNS``; ``end_ns``
    is where the observation's coverage ends.
    """
    if frame.empty:
        return []
    frame = frame.sort_values(["monitor_patient_id", "start_ns", "bed_label", "lifetime_id"],
                              kind="mergesort").reset_index(drop=True)

    ids = frame["monitor_patient_id"].to_numpy()
    beds = frame["bed_label"].to_numpy()
    lifetimes = frame["lifetime_id"].to_numpy()
    key_change = np.ones(len(frame), dtype=bool)
    key_change[1:] = (ids[1:] != ids[:-1]) | (beds[1:] != beds[:-1]) | (lifetimes[1:] != lifetimes[:-1])
    run = np.cumsum(key_change)

    new_range = key_change.copy()
    if max_gap is not None:
        reach = frame.groupby(run)["end_ns"].cummax().to_numpy()
        starts = frame["start_ns"].to_numpy()
        gap_ns = int(pd.Timedelta(max_gap).value)
        new_range[1:] |= (starts[1:] - reach[:-1]) > gap_ns

    frame["range"] = np.cumsum(new_range)
    grouped = frame.groupby("range", sort=True).agg(
        monitor_patient_id=("monitor_patient_id", "first"),
        bed_label=("bed_label", "first"),
        lifetime_id=("lifetime_id", "first"),
        start_ns=("start_ns", "min"),
        end_ns=("end_ns", "max"),
    )

    ranges: List[StreamRange] = []
    for row in grouped.itertuples(index=False):
        start_ns, end_ns = int(row.start_ns), int(row.end_ns)
        if end_ns <= start_ns:
            end_ns = start_ns + NS_PER_SECOND
        ranges.append(StreamRange(
            monitor_patient_id=row.monitor_patient_id,
            bed_label=row.bed_label,
            start=from_ns(start_ns),
            end=from_ns(end_ns),
            lifetime_id=row.lifetime_id or None,
        ))
    return sorted(ranges, key=lambda r: (r.monitor_patient_id, r.start, r.bed_label))


def collapse_stream_ranges(rows: Sequence[MonitorPatientStream],
                           max_gap: Optional[timedelta] = DEFAULT_MAX_GAP) -> List[StreamRange]:
    """
    Merge consecutive observations of the same (id, bed) into one min/max range.

    A new range starts when the bed or lifetime id changes, or when the next
    observation begins more than ``max_gap`` after the range's reach. A range
    of zero length is widened to one second.
    """
    frame = pd.DataFrame(
        [(r.monitor_patient_id, r.bed_label, r.lifetime_id or "", r.first_seen.value, r.last_seen.value)
         for r in rows],
        columns=RANGE_COLUMNS,
    )
    return collapse_frame(frame, max_gap)


def observation_frame(bundle: ExtractBundle) -> pd.DataFrame:
    """Coverage rows from numerics (one second each) and wave blocks (their duration)."""
    numerics = bundle.numerics
    numeric_start = to_ns(numerics["observed_at"])
    parts = [pd.DataFrame({
        "monitor_patient_id": numerics["monitor_patient_id"].to_numpy(),
        "bed_label": numerics["bed_label"].to_numpy(),
        "lifetime_id": numerics["lifetime_id"].to_numpy(),
        "start_ns": numeric_start,
        "end_ns": numeric_start + NS_PER_SECOND,
    })]

    waves = bundle.tables["wave_samples"]
    if not waves.empty:
        wave_start = to_ns(waves["block_start"])
        durations = np.array([samples_duration_ns(len(s), int(r))
                              for s, r in zip(waves["samples"], waves["sample_rate"])], dtype=np.int64)
        parts.append(pd.DataFrame({
            "monitor_patient_id": waves["monitor_patient_id"].to_numpy(),
            "bed_label": waves["bed_label"].to_numpy(),
            "lifetime_id": waves["lifetime_id"].to_numpy(),
            "start_ns": wave_start,
            "end_ns": wave_start + durations,
        }))
    frame = pd.concat(parts, ignore_index=True)
    frame["start_ns"] = frame["start_ns"].astype(np.int64)
    frame["end_ns"] = frame["end_ns"].astype(np.int64)
    return frame[RANGE_COLUMNS]


def bundle_stream_ranges(bundle: ExtractBundle,
                         max_gap: Optional[timedelta] = DEFAULT_MAX_GAP) -> List[StreamRange]:
    return collapse_frame(observation_frame(bundle), max_gap)
