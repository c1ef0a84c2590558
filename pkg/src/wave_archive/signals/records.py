"""
Single-signal WFDB records (format 16): ``<name>.hea`` header plus
``<name>.dat`` little-endian 16-bit samples.
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..extract.schema import WaveSampleRecord
from ..extract.waves import WaveKind, lookup_wave
from ..utils.errors import (
    ChecksumMismatch,
    DurationMismatch,
    HeaderParseError,
    OverlappingBlocks,
    UnknownWaveSymbol,
    UnwritableOutput,
)
from ..utils.utils import NS_PER_SECOND, utc
from .quantization import Quantization, checksum16, dequantize, quantize, record_quantization

logger = logging.getLogger(__name__)

DAT_DTYPE = np.dtype("<i2")
FORMAT = 16
ADC_RESOLUTION = 16

_RECORD_LINE = re.compile(
    r"^(?P<name>\S+)\s+(?P<nsig>\d+)\s+(?P<rate>\d+(?:\.\d+)?)\s+(?P<n>\d+)"
    r"(?:\s+(?P<time>\d{1,2}:\d{2}:\d{2}(?:\.\d+)?))?(?:\s+(?P<date>\d{2}/\d{2}/\d{4}))?\s*$"
)
_SIGNAL_LINE = re.compile(
    r"^(?P<file>\S+)\s+(?P<fmt>\d+)\s+(?P<gain>[0-9.eE+-]+)\((?P<baseline>-?\d+)\)/(?P<unit>\S+)"
    r"\s+(?P<adcres>\d+)\s+(?P<adczero>-?\d+)\s+(?P<init>-?\d+)\s+(?P<checksum>-?\d+)"
    r"\s+(?P<block>\d+)\s*(?P<description>.*)$"
)


@dataclass(frozen=True)
class SignalRecord:
    record_name: str
    wave: WaveKind
    sample_rate: int
    n_samples: int
    gain: float
    baseline: int
    checksum16: int
    base_time: pd.Timestamp
    file_name: str
    size_bytes: int
    samples: np.ndarray = field(compare=False, repr=False)

    @property
    def quantization(self) -> Quantization:
        return Quantization(self.gain, self.baseline)


@dataclass(frozen=True)
class RecordData:
    record: SignalRecord
    samples: np.ndarray = field(repr=False)
    gap_mask: np.ndarray = field(repr=False)

    @property
    def wave(self) -> WaveKind:
        return self.record.wave

    @property
    def rate(self) -> int:
        return self.record.sample_rate


def record_name(study_id: str, symbol: str) -> str:
    return f"{study_id}_{symbol}"


def format_base_time(ts: pd.Timestamp) -> str:
    """``HH:MM:SS[.ffffff] DD/MM/YYYY``"""
    ts = utc(ts)
    text = ts.strftime("%H:%M:%S")
    if ts.microsecond:
        text += "." + f"{ts.microsecond:06d}".rstrip("0")
    return f"{text} {ts.strftime('%d/%m/%Y')}"


def _sample_offset(delta_ns: int, rate: int) -> int:
    return (delta_ns * rate + NS_PER_SECOND // 2) // NS_PER_SECOND


def assemble_samples(blocks: Sequence[WaveSampleRecord], rate: int) -> np.ndarray:
    """Lay blocks on one sample grid from the first block; holes become NaN."""
    ordered = sorted(blocks, key=lambda b: b.block_start.value)
    origin = ordered[0].block_start.value
    placements = []
    reach = 0
    for block in ordered:
        offset = _sample_offset(block.block_start.value - origin, rate)
        if offset < reach:
            raise OverlappingBlocks(f"{block.wave.symbol} block at {block.block_start} overlaps the previous block")
        placements.append((offset, block.samples))
        reach = offset + block.n_samples
    physical = np.full(reach, np.nan, dtype=np.float64)
    for offset, samples in placements:
        physical[offset:offset + len(samples)] = samples
    return physical


def header_text(record: SignalRecord, initial_value: int) -> str:
    return (
        f"{record.record_name} 1 {record.sample_rate} {record.n_samples} {format_base_time(record.base_time)}\n"
        f"{record.file_name} {FORMAT} {record.quantization.gain_text}({record.baseline})/{record.wave.unit} "
        f"{ADC_RESOLUTION} 0 {initial_value} {record.checksum16} 0 {record.wave.name}\n"
    )


def write_record(study_id: str, wave: WaveKind, blocks: Sequence[WaveSampleRecord],
                 out_dir: Path) -> Optional[SignalRecord]:
    """
    Write one wave of a study as a header/data pair.

    The record runs from the first block's start to the last block's end,
    and the header base time places it inside the study window. Holes
    between blocks and NaN samples are stored as INVALID, so a wave whose
    blocks hold no finite value still yields an all-INVALID record.
    Returns None (and writes nothing) for an empty block list.
    """
    if not blocks:
        return None
    for block in blocks:
        if block.wave.symbol != wave.symbol:
            raise ValueError(f"block of {block.wave.symbol} passed for wave {wave.symbol}")

    physical = assemble_samples(blocks, wave.rate)
    q = record_quantization(physical)
    adu = quantize(physical, q)
    name = record_name(study_id, wave.symbol)
    record = SignalRecord(
        record_name=name,
        wave=wave,
        sample_rate=wave.rate,
        n_samples=int(adu.size),
        gain=q.gain,
        baseline=q.baseline,
        checksum16=checksum16(adu),
        base_time=min(b.block_start for b in blocks),
        file_name=f"{name}.dat",
        size_bytes=int(adu.size) * DAT_DTYPE.itemsize,
        samples=adu,
    )
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / record.file_name).write_bytes(adu.astype(DAT_DTYPE).tobytes())
        with open(out_dir / f"{name}.hea", "w", encoding="utf-8", newline="\n") as f:
            f.write(header_text(record, int(adu[0])))
    except OSError as e:
        raise UnwritableOutput(f"cannot write record {name} in {out_dir}: {e}") from e
    return record


def _parse_header(hea_path: Path) -> tuple[re.Match[str], re.Match[str]]:
    try:
        lines = [line.strip() for line in hea_path.read_text(encoding="utf-8").splitlines()]
    except (OSError, UnicodeDecodeError) as e:
        raise HeaderParseError(f"{hea_path.name}: unreadable header ({e})") from e
    lines = [line for line in lines if line and not line.startswith("#")]
    if len(lines) < 2:
        raise HeaderParseError(f"{hea_path.name}: expected a record line and one signal line")
    record_line = _RECORD_LINE.match(lines[0])
    signal_line = _SIGNAL_LINE.match(lines[1])
    if record_line is None:
        raise HeaderParseError(f"{hea_path.name}: malformed record line")
    if signal_line is None:
        raise HeaderParseError(f"{hea_path.name}: malformed signal line")
    if int(record_line["nsig"]) != 1:
        raise HeaderParseError(f"{hea_path.name}: only single-signal records are supported")
    if int(signal_line["fmt"]) != FORMAT:
        raise HeaderParseError(f"{hea_path.name}: only format {FORMAT} is supported")
    return record_line, signal_line


def _parse_base_time(time_text: Optional[str], date_text: Optional[str], hea_path: Path) -> pd.Timestamp:
    if not time_text or not date_text:
        raise HeaderParseError(f"{hea_path.name}: base time and date are required")
    try:
        return utc(pd.to_datetime(f"{date_text} {time_text}", format="%d/%m/%Y %H:%M:%S.%f")
                   if "." in time_text else
                   pd.to_datetime(f"{date_text} {time_text}", format="%d/%m/%Y %H:%M:%S"))
    except ValueError as e:
        raise HeaderParseError(f"{hea_path.name}: bad base time ({e})") from None


def renamed_header(hea_path: Path, new_name: str, shift: pd.Timedelta) -> str:
    """Header text for the same record under ``new_name`` with its base time moved back by ``shift``."""
    record_line, signal_line = _parse_header(hea_path)
    base = _parse_base_time(record_line["time"], record_line["date"], hea_path) - shift
    return (
        f"{new_name} 1 {record_line['rate']} {record_line['n']} {format_base_time(base)}\n"
        f"{new_name}.dat {signal_line['fmt']} {signal_line['gain']}({signal_line['baseline']})/{signal_line['unit']} "
        f"{signal_line['adcres']} {signal_line['adczero']} {signal_line['init']} {signal_line['checksum']} "
        f"{signal_line['block']} {signal_line['description']}\n"
    )


def read_record(hea_path: Path) -> RecordData:
    """
    Read a record back to physical units; INVALID samples come back as NaN
    with ``gap_mask`` set.
    """
    hea_path = Path(hea_path)
    record_line, signal_line = _parse_header(hea_path)
    name = record_line["name"]
    symbol = name.rsplit("_", 1)[-1]
    try:
        wave = lookup_wave(symbol)
    except UnknownWaveSymbol as e:
        raise HeaderParseError(f"{hea_path.name}: {e}") from None

    rate_value = float(record_line["rate"])
    if rate_value != wave.rate:
        raise DurationMismatch(f"{name}: header rate {record_line['rate']} but {symbol} is sampled at {wave.rate}/s")
    n_samples = int(record_line["n"])

    dat_path = hea_path.parent / signal_line["file"]
    if not dat_path.is_file():
        raise HeaderParseError(f"{hea_path.name}: data file {signal_line['file']} is missing")
    size = dat_path.stat().st_size
    if size != n_samples * DAT_DTYPE.itemsize:
        raise DurationMismatch(f"{name}: header declares {n_samples} samples but {dat_path.name} holds {size} bytes")

    adu = np.fromfile(dat_path, dtype=DAT_DTYPE)
    declared = int(signal_line["checksum"])
    if checksum16(adu) != declared:
        raise ChecksumMismatch(f"{name}: checksum {checksum16(adu)} does not match header {declared}")

    q = Quantization(gain=float(signal_line["gain"]), baseline=int(signal_line["baseline"]))
    record = SignalRecord(
        record_name=name,
        wave=wave,
        sample_rate=wave.rate,
        n_samples=n_samples,
        gain=q.gain,
        baseline=q.baseline,
        checksum16=declared,
        base_time=_parse_base_time(record_line["time"], record_line["date"], hea_path),
        file_name=signal_line["file"],
        size_bytes=size,
        samples=adu,
    )
    physical = dequantize(adu, q)
    return RecordData(record=record, samples=physical, gap_mask=np.isnan(physical))
