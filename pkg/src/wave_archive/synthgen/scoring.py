"""Score linkage output against generator ground truth."""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, cast

import numpy as np
from scipy import stats

from ..linkage.matcher import LinkageMethod, LinkageResult, LinkageSegment
from .generator import GroundTruth, TrueSegment

INFERRED_METHODS = (LinkageMethod.DEVICE_LOG, LinkageMethod.ADT_OVERLAP)


@dataclass(frozen=True)
class LinkageScore:
    """
    ``coverage`` is the share of stays recorded without a lifetime id that got
    an MRN from either pass; ``accuracy`` is the share of inferred assignments
    naming the true patient, ``None`` when nothing was inferred.
    """
    coverage: float
    accuracy: Optional[float]
    missing_id: int
    covered: int
    assigned: int
    correct: int
    unscored: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "coverage": self.coverage,
            "accuracy": self.accuracy,
            "missing_id": self.missing_id,
            "covered": self.covered,
            "assigned": self.assigned,
            "correct": self.correct,
            "unscored": self.unscored,
        }


def _overlap_ns(segment: LinkageSegment, truth: TrueSegment) -> int:
    return max(0, min(segment.end.value, truth.end.value) - max(segment.start.value, truth.start.value))


def _same_stream(monitor_patient_id: str, segment: LinkageSegment, truth: TrueSegment) -> bool:
    return truth.monitor_patient_id == monitor_patient_id and truth.device_bed_label == segment.device_bed_label


def score_linkage(results: Sequence[LinkageResult], truth: GroundTruth) -> LinkageScore:
    flat: List[Tuple[str, LinkageSegment]] = [
        (result.monitor_patient_id, segment) for result in results for segment in result.segments
    ]

    assigned = correct = unscored = 0
    for monitor_patient_id, segment in flat:
        if segment.method not in INFERRED_METHODS:
            continue
        scored = [(_overlap_ns(segment, t), t) for t in truth.segments
                  if _same_stream(monitor_patient_id, segment, t)]
        scored = [(ov, t) for ov, t in scored if ov > 0]
        if not scored:
            unscored += 1
            continue
        best = max(scored, key=lambda pair: (pair[0], -pair[1].start.value))[1]
        assigned += 1
        correct += int(segment.assigned_mrn == best.mrn)

    missing = [t for t in truth.segments if not t.lifetime_id_present]
    covered = sum(
        1 for t in missing
        if any(_same_stream(mpid, s, t) and s.assigned_mrn and _overlap_ns(s, t) > 0 for mpid, s in flat)
    )
    return LinkageScore(
        coverage=covered / len(missing) if missing else 1.0,
        accuracy=correct / assigned if assigned else None,
        missing_id=len(missing),
        covered=covered,
        assigned=assigned,
        correct=correct,
        unscored=unscored,
    )


def _interval(values: List[float]) -> Dict[str, Any]:
    if not values:
        return {"mean": None, "ci_95": None, "n": 0}
    mean = float(np.mean(values))
    if len(values) < 2 or float(np.std(values)) == 0.0:
        return {"mean": mean, "ci_95": (mean, mean), "n": len(values)}
    ci = cast(
        Tuple[float, float],
        stats.t.interval(  # type: ignore[call-arg]
            confidence=0.95,
            df=len(values) - 1,
            loc=mean,
            scale=stats.sem(values)  # type: ignore[call-arg]
        )
    )
    return {"mean": mean, "ci_95": (float(ci[0]), float(ci[1])), "n": len(values)}


def summarize_scores(scores: Sequence[LinkageScore]) -> Dict[str, Any]:
    """Mean and 95% t-interval of coverage and accuracy across days."""
    return {
        "coverage": _interval([s.coverage for s in scores]),
        "accuracy": _interval([s.accuracy for s in scores if s.accuracy is not None]),
        "assigned": sum(s.assigned for s in scores),
        "correct": sum(s.correct for s in scores),
    }
