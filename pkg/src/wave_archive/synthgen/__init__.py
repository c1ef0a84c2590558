from .generator import (
    GroundTruth,
    TruePatient,
    TrueSegment,
    bed_unit_rows,
    device_bed_label,
    emr_bed_label,
    generate_corpus,
    generate_day,
    load_truth,
    merge_expected_stats,
    truth_path,
    write_bed_units,
)
from .noise import AdtNoiseInjector, NoiseType
from .scenario import AdtNoise, ScenarioConfig
from .scoring import LinkageScore, score_linkage, summarize_scores

__all__ = [
    'AdtNoise',
    'AdtNoiseInjector',
    'GroundTruth',
    'LinkageScore',
    'NoiseType',
    'ScenarioConfig',
    'TruePatient',
    'TrueSegment',
    'bed_unit_rows',
    'device_bed_label',
    'emr_bed_label',
    'generate_corpus',
    'generate_day',
    'load_truth',
    'merge_expected_stats',
    'score_linkage',
    'summarize_scores',
    'truth_path',
    'write_bed_units',
]
