import hashlib
import hmac
import json
import os
import shutil
import time
from contextlib import contextmanager
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Any, Iterable, Iterator, Tuple, Union

import numpy as np
import pandas as pd

NS_PER_SECOND = 1_000_000_000
TMP_PREFIX = ".tmp-"

TimeLike = Union[str, datetime, pd.Timestamp]


def utc(value: TimeLike) -> pd.Timestamp:
    """Return ``value`` as a tz-aware UTC timestamp (naive input is taken as UTC)."""
    ts = pd.Timestamp(value)
    if ts.tzinfo is None:
        return ts.tz_localize("UTC")
    return ts.tz_convert("UTC")


def from_ns(ns: int) -> pd.Timestamp:
    return pd.Timestamp(int(ns), unit="ns", tz="UTC")


def ts_ns(value: TimeLike) -> int:
    return int(utc(value).value)


def to_ns(values: pd.Series) -> np.ndarray:
    """Nanoseconds since the epoch for a column of UTC timestamps."""
    series = pd.to_datetime(values, utc=True)
    naive = series.dt.tz_localize(None).astype("datetime64[ns]")
    return naive.to_numpy().view("int64")


def day_bounds(day: date) -> Tuple[pd.Timestamp, pd.Timestamp]:
    start = pd.Timestamp(day.year, day.month, day.day, tz="UTC")
    return start, start + pd.Timedelta(days=1)


def parse_day(value: Union[str, date]) -> date:
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    return datetime.strptime(value, "%Y-%m-%d").date()


def day_range(first: date, last: date) -> list[date]:
    days: list[date] = []
    current = first
    while current <= last:
        days.append(current)
        current += timedelta(days=1)
    return days


def format_ts(value: TimeLike) -> str:
    """ISO-8601 with a ``Z`` suffix; fractional seconds only when present."""
    ts = utc(value)
    text = ts.strftime("%Y-%m-%dT%H:%M:%S")
    frac_ns = ts.value % NS_PER_SECOND
    if frac_ns:
        text += "." + f"{frac_ns:09d}".rstrip("0")
    return text + "Z"


def compact_ts(value: TimeLike) -> str:
    return utc(value).strftime("%Y%m%dT%H%M%SZ")


def samples_duration_ns(n_samples: int, rate: int) -> int:
    """Duration of ``n_samples`` at ``rate``, rounded to the nearest nanosecond."""
    return (2 * n_samples * NS_PER_SECOND + rate) // (2 * rate)


def samples_before(offset_ns: int, rate: int) -> int:
    """Number of samples whose timestamp is strictly before ``offset_ns``."""
    if offset_ns <= 0:
        return 0
    return -((-offset_ns * rate) // NS_PER_SECOND)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path, chunk_size: int = 1024 * 1024) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        while True:
            chunk = handle.read(chunk_size)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


def keyed_digest(secret: str, domain: str, value: str) -> bytes:
    return hmac.new(secret.encode("utf-8"), f"{domain}:{value}".encode("utf-8"),
                    hashlib.sha256).digest()


def tree_digest(root: Path, exclude: Iterable[str] = ()) -> str:
    """Digest over every regular file below ``root`` (relative path + content)."""
    excluded = set(exclude)
    digest = hashlib.sha256()
    if not root.exists():
        return digest.hexdigest()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = path.relative_to(root).as_posix()
        if rel.split("/")[0] in excluded or any(part.startswith(TMP_PREFIX) for part in rel.split("/")):
            continue
        digest.update(rel.encode("utf-8"))
        digest.update(b"\0")
        digest.update(sha256_file(path).encode("ascii"))
        digest.update(b"\n")
    return digest.hexdigest()


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, pd.Timestamp):
        return format_ts(value)
    if isinstance(value, (date, Path)):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dump_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, default=_json_default) + "\n"


def write_json(path: Path, obj: Any) -> None:
    atomic_write_text(path, dump_json(obj))


def read_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{TMP_PREFIX}{path.name}.{os.getpid()}")
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


@contextmanager
def staged_directory(target: Path) -> Iterator[Path]:
    """Build a directory under a temporary name and swap it into place.

    On error the staging directory is left behind for quarantine.
    """
    target.parent.mkdir(parents=True, exist_ok=True)
    staging = target.with_name(f"{TMP_PREFIX}{target.name}.{os.getpid()}")
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir()
    yield staging
    retired = target.with_name(f"{TMP_PREFIX}old-{target.name}.{os.getpid()}")
    if target.exists():
        os.replace(target, retired)
    os.replace(staging, target)
    if retired.exists():
        shutil.rmtree(retired)


@contextmanager
def file_lock(lock_path: Path, timeout: float = 120.0, poll: float = 0.05) -> Iterator[None]:
    """Exclusive lock through an ``O_EXCL`` lock file."""
    lock_path.parent.mkdir(parents=True, exist_ok=True)
    deadline = time.monotonic() + timeout
    while True:
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            break
        except FileExistsError:
            if time.monotonic() > deadline:
                raise TimeoutError(f"could not acquire {lock_path}")
            time.sleep(poll)
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield
    finally:
        try:
            os.remove(lock_path)
        except FileNotFoundError:
            pass
