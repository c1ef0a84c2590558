"""Scenario parameters for the synthetic corpus generator."""

from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date, timedelta
from typing import Any, Dict, List, Tuple

from ..extract.waves import WAVE_REGISTRY
from ..utils.config import load_config
from ..utils.errors import ConfigInvalid
from ..utils.utils import parse_day

DEFAULT_UNITS = ["PICU", "NICU", "CVICU", "OR"]
DEFAULT_WAVES = ["II", "V", "Pleth", "Resp", "ABP"]


@dataclass(frozen=True)
class AdtNoise:
    """Per-patient (per-event for duplicates) rates of the three ADT pathologies."""

    zero_length_pairs: float = 0.0
    duplicates: float = 0.0
    readmit_chains: float = 0.0

    @property
    def silent(self) -> bool:
        return not (self.zero_length_pairs or self.duplicates or self.readmit_chains)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    days: int = 1
    start_day: date = date(2021, 3, 1)
    patients_per_day: int = 12
    beds: int = 8
    units: List[str] = field(default_factory=lambda: list(DEFAULT_UNITS))
    waves: List[str] = field(default_factory=lambda: list(DEFAULT_WAVES))
    waves_per_patient: Tuple[int, int] = (2, 3)
    transfer_rate: float = 0.2
    new_monitor_id_on_transfer: float = 0.7
    missing_lifetime_id_fraction: float = 0.5
    or_shared_stream_fraction: float = 0.1
    device_log_fraction: float = 1.0
    adt_missing_fraction: float = 0.0
    adt_jitter_seconds: int = 0
    adt_noise: AdtNoise = field(default_factory=AdtNoise)
    readmit_gap_seconds: int = 120
    stay_minutes: Tuple[int, int] = (30, 120)
    turnover_minutes: Tuple[int, int] = (5, 30)
    numeric_interval_seconds: int = 30
    wave_block_seconds: int = 4
    wave_block_interval_seconds: int = 120
    alerts_per_hour: float = 2.0
    name_in_alert_fraction: float = 0.2

    def __post_init__(self) -> None:
        rates = {
            "transfer_rate": self.transfer_rate,
            "new_monitor_id_on_transfer": self.new_monitor_id_on_transfer,
            "missing_lifetime_id_fraction": self.missing_lifetime_id_fraction,
            "or_shared_stream_fraction": self.or_shared_stream_fraction,
            "device_log_fraction": self.device_log_fraction,
            "adt_missing_fraction": self.adt_missing_fraction,
            "name_in_alert_fraction": self.name_in_alert_fraction,
            **{f"adt_noise.{k}": v for k, v in asdict(self.adt_noise).items()},
        }
        for name, value in rates.items():
            if not 0.0 <= value <= 1.0:
                raise ConfigInvalid(f"{name} must be in [0, 1], got {value}")
        if self.beds < 1:
            raise ConfigInvalid("beds must be non-empty")
        if self.beds > 26 * 99:
            raise ConfigInvalid("at most 2574 beds can be labelled")
        if not self.units:
            raise ConfigInvalid("units must be non-empty")
        if self.days < 1 or self.patients_per_day < 0:
            raise ConfigInvalid("days must be positive and patients_per_day non-negative")
        unknown = [w for w in self.waves if w not in WAVE_REGISTRY]
        if unknown:
            raise ConfigInvalid(f"waves not in the registry: {unknown}")
        if len(set(self.waves)) != len(self.waves):
            raise ConfigInvalid("waves are listed twice")
        for name, (lo, hi) in (("waves_per_patient", self.waves_per_patient),
                               ("stay_minutes", self.stay_minutes),
                               ("turnover_minutes", self.turnover_minutes)):
            if not 0 <= lo <= hi:
                raise ConfigInvalid(f"{name} must be an ordered non-negative pair")
        if self.waves_per_patient[1] > len(self.waves):
            raise ConfigInvalid("waves_per_patient exceeds the number of waves")
        if self.stay_minutes[0] < 30:
            raise ConfigInvalid("stays shorter than 30 minutes are not generated")
        if self.turnover_minutes[0] < 1:
            raise ConfigInvalid("bed turnover must be at least one minute")
        if min(self.numeric_interval_seconds, self.wave_block_seconds, self.wave_block_interval_seconds) < 1:
            raise ConfigInvalid("intervals must be positive whole seconds")
        if self.wave_block_seconds > self.wave_block_interval_seconds:
            raise ConfigInvalid("wave blocks cannot be longer than their interval")
        if self.adt_jitter_seconds < 0 or self.adt_jitter_seconds > 600:
            raise ConfigInvalid("adt_jitter_seconds must be in [0, 600]")
        if self.readmit_gap_seconds < 1:
            raise ConfigInvalid("readmit_gap_seconds must be positive")
        if self.alerts_per_hour < 0:
            raise ConfigInvalid("alerts_per_hour must be non-negative")

    @property
    def day_list(self) -> List[date]:
        return [self.start_day + timedelta(days=i) for i in range(self.days)]

    @classmethod
    def clean(cls, seed: int, **overrides: Any) -> 'ScenarioConfig':
        """No ADT noise and complete evidence: every stay has ADT events and a device log."""
        return replace(cls(seed=seed), **overrides)

    @classmethod
    def noisy(cls, seed: int, **overrides: Any) -> 'ScenarioConfig':
        """
        Noisy profile: half of the streams lack a lifetime id, device logs and
        ADT events are incomplete and charted late or early.
        """
        base = cls(
            seed=seed,
            patients_per_day=14,
            waves=["II", "Pleth", "Resp"],
            waves_per_patient=(1, 2),
            transfer_rate=0.3,
            or_shared_stream_fraction=0.15,
            device_log_fraction=0.6,
            adt_missing_fraction=0.1,
            adt_jitter_seconds=180,
            adt_noise=AdtNoise(zero_length_pairs=0.05, duplicates=0.1, readmit_chains=0.1),
            wave_block_interval_seconds=300,
        )
        return replace(base, **overrides)

    @classmethod
    def from_dict(cls, config: Dict[str, Any]) -> 'ScenarioConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(config) - known - {"profile"}
        if unknown:
            raise ConfigInvalid(f"unknown scenario keys: {sorted(unknown)}")
        if "seed" not in config:
            raise ConfigInvalid("seed is required")
        values = {k: v for k, v in config.items() if k != "profile"}
        try:
            if "start_day" in values:
                values["start_day"] = parse_day(str(values["start_day"]))
            if "adt_noise" in values:
                values["adt_noise"] = AdtNoise(**(values["adt_noise"] or {}))
            for key in ("waves_per_patient", "stay_minutes", "turnover_minutes"):
                if key in values:
                    values[key] = tuple(int(v) for v in values[key])
        except (TypeError, ValueError) as e:
            raise ConfigInvalid(f"invalid scenario value: {e}") from None

        profile = config.get("profile", "clean")
        if profile == "clean":
            return cls.clean(**values)
        if profile == "noisy":
            return cls.noisy(**values)
        raise ConfigInvalid(f"profile must be clean or noisy, got {profile!r}")

    @classmethod
    def load(cls, path: str) -> 'ScenarioConfig':
        return cls.from_dict(load_config(path))
