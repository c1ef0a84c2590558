"""Study filling: every record of the day lands in exactly one study or the orphan report."""

import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from ..extract.schema import ExtractBundle, WaveSampleRecord
from ..utils.errors import OrphanData
from ..utils.utils import from_ns, samples_before, samples_duration_ns, to_ns
from .planner import StudySkeleton

logger = logging.getLogger(__name__)

# table -> timestamp column used for study membership
POINT_TABLES = {"numerics": "observed_at", "alerts": "at", "enumerations": "observed_at"}


@dataclass
class Study:
    skeleton: StudySkeleton
    waves: Dict[str, List[WaveSampleRecord]] = field(default_factory=dict)
    numerics: pd.DataFrame = field(default_factory=pd.DataFrame)
    alerts: pd.DataFrame = field(default_factory=pd.DataFrame)
    enumerations: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def study_id(self) -> str:
        return self.skeleton.study_id

    @property
    def start(self) -> pd.Timestamp:
        return self.skeleton.start

    @property
    def end(self) -> pd.Timestamp:
        return self.skeleton.end

    def sample_counts(self) -> Dict[str, int]:
        return {symbol: sum(b.n_samples for b in blocks) for symbol, blocks in self.waves.items()}


@dataclass
class OrphanReport:
    """Records of the day that fall into no study."""
    rows: Dict[str, int] = field(default_factory=lambda: {table: 0 for table in POINT_TABLES})
    wave_samples: Dict[str, int] = field(default_factory=dict)
    beds: List[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not any(self.rows.values()) and not any(self.wave_samples.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": dict(sorted(self.rows.items())),
            "wave_samples": dict(sorted(self.wave_samples.items())),
            "beds": sorted(set(self.beds)),
        }


def _windows_by_key(skeletons: Sequence[StudySkeleton]) -> Dict[Tuple[str, str], Tuple[np.ndarray, np.ndarray, List[int]]]:
    grouped: Dict[Tuple[str, str], List[int]] = defaultdict(list)
    for index, skeleton in enumerate(skeletons):
        grouped[skeleton.key].append(index)
    windows: Dict[Tuple[str, str], Tuple[np.ndarray, np.ndarray, List[int]]] = {}
    for key, indices in grouped.items():
        indices.sort(key=lambda i: skeletons[i].start)
        starts = np.array([skeletons[i].start.value for i in indices], dtype=np.int64)
        ends = np.array([skeletons[i].end.value for i in indices], dtype=np.int64)
        if np.any(starts[1:] < ends[:-1]):
            raise ValueError(f"overlapping study windows on bed {skeletons[indices[0]].bed_label}")
        windows[key] = (starts, ends, indices)
    return windows


def _assign_points(frame: pd.DataFrame, column: str,
                   windows: Dict[Tuple[str, str], Tuple[np.ndarray, np.ndarray, List[int]]]) -> np.ndarray:
    """Study index per row, -1 for rows outside every study (half-open ranges)."""
    owner = np.full(len(frame), -1, dtype=np.int64)
    if frame.empty:
        return owner
    times = to_ns(frame[column])
    for key, positions in frame.groupby(["monitor_patient_id", "bed_label"], sort=False).indices.items():
        if key not in windows:
            continue
        starts, ends, indices = windows[key]
        t = times[positions]
        slot = np.searchsorted(starts, t, side="right") - 1
        inside = (slot >= 0) & (t < ends[np.clip(slot, 0, None)])
        lookup = np.asarray(indices, dtype=np.int64)
        owner[positions[inside]] = lookup[slot[inside]]
    return owner


def _split_block(block: WaveSampleRecord, start_ns: int, end_ns: int) -> WaveSampleRecord:
    """The part of ``block`` whose sample times fall in [start_ns, end_ns)."""
    base = block.block_start.value
    first = min(samples_before(start_ns - base, block.sample_rate), block.n_samples)
    last = min(samples_before(end_ns - base, block.sample_rate), block.n_samples)
    return WaveSampleRecord(
        monitor_patient_id=block.monitor_patient_id,
        bed_label=block.bed_label,
        wave=block.wave,
        block_start=from_ns(base + samples_duration_ns(first, block.sample_rate)),
        sample_rate=block.sample_rate,
        samples=block.samples[first:last],
        lifetime_id=block.lifetime_id,
    )


def fill_day(skeletons: Sequence[StudySkeleton], bundle: ExtractBundle) -> Tuple[List[Study], OrphanReport]:
    """
    Gather waves, numerics, alerts and enumerations into their studies.

    Membership is by (monitor patient id, device bed, timestamp in
    [start, end)). Wave blocks straddling a study edge are split at the
    first sample whose time is at or after the edge.
    """
    studies = [Study(skeleton=s) for s in skeletons]
    windows = _windows_by_key(skeletons)
    orphans = OrphanReport()

    for table, column in POINT_TABLES.items():
        frame = bundle.tables[table]
        owner = _assign_points(frame, column, windows)
        stray = owner < 0
        orphans.rows[table] = int(stray.sum())
        if stray.any():
            orphans.beds.extend(frame.loc[stray, "bed_label"].unique().tolist())
        for study in studies:
            setattr(study, table, frame.iloc[0:0].reset_index(drop=True))
        for index, part in frame.groupby(owner, sort=True):
            if index >= 0:
                setattr(studies[int(index)], table, part.reset_index(drop=True))

    for block in bundle.wave_blocks():
        placed = 0
        key = (block.monitor_patient_id, block.bed_label)
        if key in windows:
            starts, ends, indices = windows[key]
            block_start, block_end = block.block_start.value, block.block_end.value
            lo = max(int(np.searchsorted(ends, block_start, side="right")), 0)
            hi = int(np.searchsorted(starts, block_end, side="left"))
            for slot in range(lo, hi):
                piece = _split_block(block, int(starts[slot]), int(ends[slot]))
                if piece.n_samples:
                    studies[indices[slot]].waves.setdefault(block.wave.symbol, []).append(piece)
                    placed += piece.n_samples
        if placed < block.n_samples:
            symbol = block.wave.symbol
            orphans.wave_samples[symbol] = orphans.wave_samples.get(symbol, 0) + block.n_samples - placed
            orphans.beds.append(block.bed_label)

    for study in studies:
        for symbol in study.waves:
            study.waves[symbol].sort(key=lambda b: b.block_start.value)

    if not orphans.empty:
        warnings.warn(OrphanData(f"{sum(orphans.rows.values())} rows and "
                                 f"{sum(orphans.wave_samples.values())} wave samples fall into no study"))
        logger.warning("orphan records: %s", orphans.to_dict()["rows"])
    return studies, orphans


def fill_study(skeleton: StudySkeleton, bundle: ExtractBundle) -> Study:
    """Fill a single study; records outside it are ignored."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OrphanData)
        studies, _ = fill_day([skeleton], bundle)
    return studies[0]
