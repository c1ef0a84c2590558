from pathlib import Path
from typing import Any, Dict, List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as _plt  # noqa: E402
import seaborn as _sns  # noqa: E402

from .stats import AGE_GROUPS, ArchiveStats  # noqa: E402

# Matplotlib/Seaborn stubs expose Unknown kwargs; treat modules as Any.
plt: Any = _plt
sns: Any = _sns

PLOT_TYPES = ["daily_studies", "wave_sizes", "unit_age"]


class ArchiveVisualizer:
    def __init__(self, visualization: Dict[str, Any]):
        self.plot_types: List[str] = list(visualization.get("plot_types", PLOT_TYPES))
        unknown = set(self.plot_types) - set(PLOT_TYPES)
        if unknown:
            raise ValueError(f"unknown plot types: {sorted(unknown)}")

    def create_visualizations(self, stats: ArchiveStats, save_dir: Path) -> List[Path]:
        """
        Draw the configured summary plots into ``save_dir``; plots without
        data are skipped.
        """
        save_dir.mkdir(parents=True, exist_ok=True)
        written: List[Path] = []
        for plot_type in self.plot_types:
            plt.figure(figsize=(10, 6))
            if plot_type == "daily_studies":
                drawn = self._create_daily_studies(stats)
            elif plot_type == "wave_sizes":
                drawn = self._create_wave_sizes(stats)
            else:
                drawn = self._create_unit_age(stats)
            if drawn:
                path = save_dir / f"{plot_type}.png"
                plt.savefig(path)
                written.append(path)
            plt.close()
        return written

    def _create_daily_studies(self, stats: ArchiveStats) -> bool:
        if stats.daily.empty:
            return False
        plt.plot(stats.daily["partition"], stats.daily["studies"], '-o', label='studies')
        plt.plot(stats.daily["partition"], stats.daily["patients"], '-o', label='patients')
        plt.title('Studies and patients per day')
        plt.xlabel('Partition')
        plt.ylabel('Count')
        plt.xticks(rotation=45, ha='right')
        plt.legend()
        plt.grid(True)
        plt.tight_layout()
        return True

    def _create_wave_sizes(self, stats: ArchiveStats) -> bool:
        if stats.per_wave.empty:
            return False
        sns.barplot(x=stats.per_wave["symbol"], y=stats.per_wave["size_bytes"] / 1e6, color="steelblue")
        plt.title('Stored size per wave')
        plt.xlabel('Wave')
        plt.ylabel('Size (MB)')
        return True

    def _create_unit_age(self, stats: ArchiveStats) -> bool:
        if stats.unit_age is None or stats.unit_age.empty:
            return False
        matrix = stats.unit_age.pivot(index="clinical_unit", columns="age_group", values="patients")
        matrix = matrix.reindex(columns=AGE_GROUPS).fillna(0).astype(int)
        sns.heatmap(matrix, annot=True, fmt="d", cmap="Blues")
        plt.title('Patients by clinical unit and age group')
        plt.xlabel('Age group')
        plt.ylabel('Clinical unit')
        plt.tight_layout()
        return True
