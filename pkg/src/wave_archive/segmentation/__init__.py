from .filler import OrphanReport, Study, fill_day, fill_study
from .planner import StudySkeleton, plan_studies, study_identifier

__all__ = [
    'OrphanReport',
    'Study',
    'StudySkeleton',
    'fill_day',
    'fill_study',
    'plan_studies',
    'study_identifier',
]
