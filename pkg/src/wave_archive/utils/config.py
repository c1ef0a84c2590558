# Configuration loading
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .errors import ConfigError

REQUIRED_SECTIONS = ['paths', 'deid', 'execution', 'linkage', 'analysis']
ROOT_KEYS = ['extracts_root', 'identified_root', 'deid_root', 'catalog_root']


def load_config(config_path: str) -> Dict[str, Any]:
    """
    Load a YAML configuration file.
    """
    with open(config_path, 'r', encoding='utf-8') as f:
        loaded = yaml.safe_load(f)
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"{config_path}: top level must be a mapping")
    return loaded


def validate_config(config: Dict[str, Any]) -> bool:
    """
    Check that a pipeline configuration has every section and sane values.
    """
    for section in REQUIRED_SECTIONS:
        if section not in config:
            raise ConfigError(f"Missing required section: {section}")

    paths = config['paths']
    for key in ROOT_KEYS:
        if not paths.get(key):
            raise ConfigError(f"paths.{key} is required")

    execution = config['execution']
    if int(execution.get('worker_count', 1)) < 1:
        raise ConfigError("worker_count must be positive")
    if int(execution.get('parallelism', 1)) < 1:
        raise ConfigError("parallelism must be positive")

    mode = config['linkage'].get('label_mode', 'lenient')
    if mode not in ('strict', 'lenient'):
        raise ConfigError(f"label_mode must be strict or lenient, got {mode!r}")

    deid = config['deid']
    if not deid.get('seed') and not deid.get('seed_env'):
        raise ConfigError("deid.seed or deid.seed_env is required")

    return True


def _roots_disjoint(roots: List[Path]) -> bool:
    for i, a in enumerate(roots):
        for b in roots[i + 1:]:
            if a == b or a in b.parents or b in a.parents:
                return False
    return True


@dataclass(frozen=True)
class PipelineConfig:
    extracts_root: Path
    identified_root: Path
    deid_root: Path
    catalog_root: Path
    deid_seed: str = field(repr=False)
    bed_map_path: Optional[Path] = None
    bed_units_path: Optional[Path] = None
    worker_count: int = 1
    parallelism: int = 1
    label_mode: str = 'lenient'
    max_gap_seconds: int = 600
    readmit_gap_seconds: int = 0
    visualization: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.worker_count < 1 or self.parallelism < 1:
            raise ConfigError("worker_count and parallelism must be >= 1")
        roots = [self.extracts_root.resolve(), self.identified_root.resolve(),
                 self.deid_root.resolve(), self.catalog_root.resolve()]
        if not _roots_disjoint(roots):
            raise ConfigError("extracts, identified, deid and catalog roots must be pairwise disjoint")

    @property
    def strict_labels(self) -> bool:
        return self.label_mode == 'strict'

    @classmethod
    def from_dict(cls, config: Dict[str, Any], base_dir: Optional[Path] = None) -> 'PipelineConfig':
        validate_config(config)
        base = base_dir or Path.cwd()

        def resolve(value: Optional[str]) -> Optional[Path]:
            if not value:
                return None
            path = Path(value)
            return path if path.is_absolute() else (base / path)

        paths = config['paths']
        deid = config['deid']
        seed = os.environ.get(deid['seed_env']) if deid.get('seed_env') else None
        seed = seed or deid.get('seed')
        if not seed:
            raise ConfigError(f"deid seed not set (environment variable {deid.get('seed_env')})")

        linkage = config['linkage']
        execution = config['execution']
        return cls(
            extracts_root=resolve(paths['extracts_root']),  # type: ignore[arg-type]
            identified_root=resolve(paths['identified_root']),  # type: ignore[arg-type]
            deid_root=resolve(paths['deid_root']),  # type: ignore[arg-type]
            catalog_root=resolve(paths['catalog_root']),  # type: ignore[arg-type]
            deid_seed=str(seed),
            bed_map_path=resolve(paths.get('bed_map')),
            bed_units_path=resolve(paths.get('bed_units')),
            worker_count=int(execution.get('worker_count', 1)),
            parallelism=int(execution.get('parallelism', 1)),
            label_mode=linkage.get('label_mode', 'lenient'),
            max_gap_seconds=int(linkage.get('max_gap_seconds', 600)),
            readmit_gap_seconds=int(linkage.get('readmit_gap_seconds', 0)),
            visualization=dict(config['analysis'].get('visualization', {})),
        )

    @classmethod
    def load(cls, config_path: str) -> 'PipelineConfig':
        config = load_config(config_path)
        return cls.from_dict(config, Path(config_path).resolve().parent)
