"""Device-side to EMR-side bed label normalization."""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import pandas as pd

from ..utils.errors import AmbiguousLabel, ConfigError

NATO_ALPHABET = [
    "ALPHA", "BRAVO", "CHARLIE", "DELTA", "ECHO", "FOXTROT", "GOLF", "HOTEL", "INDIA",
    "JULIETT", "KILO", "LIMA", "MIKE", "NOVEMBER", "OSCAR", "PAPA", "QUEBEC", "ROMEO",
    "SIERRA", "TANGO", "UNIFORM", "VICTOR", "WHISKEY", "XRAY", "YANKEE", "ZULU",
]
# Spellings seen in the wild for the same letters
_ALIASES = {"JULIET": "J", "WHISKY": "W", "X-RAY": "X"}

NATO_LETTERS: Dict[str, str] = {word: word[0] for word in NATO_ALPHABET}
NATO_LETTERS.update(_ALIASES)

_DEVICE_LABEL_RE = re.compile(r"^(\d+)([A-Za-z][A-Za-z-]*)$")


@dataclass(frozen=True)
class BedLabelMap:
    overrides: Dict[str, str] = field(default_factory=dict)
    nato_rule_enabled: bool = True
    strict: bool = False

    def __post_init__(self) -> None:
        for device_label, emr_label in self.overrides.items():
            if not device_label or not emr_label or emr_label != emr_label.strip():
                raise ConfigError(f"invalid bed map entry {device_label!r} -> {emr_label!r}")
        values = list(self.overrides.values())
        if len(set(values)) != len(values):
            raise ConfigError("bed map must be injective: two device labels map to the same EMR bed")

    @classmethod
    def from_csv(cls, path: Optional[Path], strict: bool = False) -> 'BedLabelMap':
        """Read a ``device_label,emr_label`` CSV; ``None`` gives the rule-only map."""
        if path is None:
            return cls(strict=strict)
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        if list(frame.columns) != ["device_label", "emr_label"]:
            raise ConfigError(f"{path}: header must be device_label,emr_label")
        duplicated = frame["device_label"].duplicated()
        if duplicated.any():
            raise ConfigError(f"{path}: device label {frame['device_label'][duplicated].iloc[0]!r} listed twice")
        return cls(overrides=dict(zip(frame["device_label"], frame["emr_label"])), strict=strict)

    def normalize(self, device_label: str) -> str:
        return normalize_bed_label(device_label, self)


def normalize_bed_label(device_label: str, bed_map: BedLabelMap) -> str:
    """
    Map a monitor bed label to the EMR bed label.

    An override wins; otherwise ``<digits><NATO word>`` becomes
    ``<letter><two-digit number>`` (13ALPHA -> A13); otherwise the label is
    returned unchanged.
    """
    if not device_label:
        raise AmbiguousLabel("empty bed label")
    if device_label in bed_map.overrides:
        return bed_map.overrides[device_label]
    if not bed_map.nato_rule_enabled:
        return device_label

    match = _DEVICE_LABEL_RE.match(device_label)
    if match is None:
        return device_label
    digits, word = match.groups()
    letter = NATO_LETTERS.get(word.upper())
    if letter is None:
        if bed_map.strict:
            raise AmbiguousLabel(f"{device_label!r}: {word!r} is not a NATO alphabet word")
        return device_label
    return f"{letter}{int(digits):02d}"
