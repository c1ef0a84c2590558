"""Exception hierarchy for the archive pipeline.

Every error derives from ``WaveArchiveError`` and from the closest builtin,
so code that only knows ``ValueError``/``RuntimeError``/``OSError`` still
catches it.
"""

from typing import Optional


class WaveArchiveError(Exception):
    """Base class for all archive errors."""


# extract

class MalformedManifest(WaveArchiveError, ValueError):
    pass


class IntegrityFailure(WaveArchiveError, ValueError):
    """A bundle or packed study does not match its manifest.

    ``kind`` is one of ``missing``, ``extra``, ``size``, ``checksum``,
    ``unlisted`` or ``layout``.
    """

    def __init__(self, kind: str, file_name: str, detail: str = ""):
        self.kind = kind
        self.file_name = file_name
        self.detail = detail
        message = f"{kind}: {file_name}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class SchemaViolation(WaveArchiveError, ValueError):
    def __init__(self, table: str, message: str, row: Optional[int] = None):
        self.table = table
        self.row = row
        where = f"{table}.csv" if row is None else f"{table}.csv row {row}"
        super().__init__(f"{where}: {message}")


class OutOfDayTimestamp(SchemaViolation):
    pass


# linkage

class AmbiguousLabel(WaveArchiveError, ValueError):
    pass


class UnpairedEvent(WaveArchiveError, UserWarning):
    """Warning category for ADT stays left open at a day boundary."""


# segmentation

class OrphanData(WaveArchiveError, UserWarning):
    """Warning category for records that fall into no study."""


# signals

class NoFiniteSamples(WaveArchiveError, ValueError):
    pass


class OverlappingBlocks(WaveArchiveError, ValueError):
    pass


class UnwritableOutput(WaveArchiveError, OSError):
    pass


class HeaderParseError(WaveArchiveError, ValueError):
    pass


class DurationMismatch(HeaderParseError):
    """Header sample count or rate disagrees with the data file or registry."""


class ChecksumMismatch(WaveArchiveError, ValueError):
    pass


class IncompleteStudyFolder(WaveArchiveError, ValueError):
    pass


# deid

class MapMissingEntry(WaveArchiveError, KeyError):
    pass


# catalog

class PartialDay(WaveArchiveError, RuntimeError):
    pass


class UnknownWaveSymbol(WaveArchiveError, ValueError):
    pass


# synthgen

class ConfigInvalid(WaveArchiveError, ValueError):
    pass


# pipeline

class ConfigError(WaveArchiveError, ValueError):
    pass


class PhaseFailure(WaveArchiveError, RuntimeError):
    def __init__(self, phase: str, cause: BaseException):
        self.phase = phase
        self.cause = cause
        super().__init__(f"phase {phase} failed: {type(cause).__name__}: {cause}")
