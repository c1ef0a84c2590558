from .deidentifier import Scrubber, StudyIdentity, deid_study_id, deidentify_study, resolve_entry
from .mapping import DeidEntry, DeidMap, batch_token, derive_shift, pseudonym, update_map

__all__ = [
    'DeidEntry',
    'DeidMap',
    'Scrubber',
    'StudyIdentity',
    'batch_token',
    'deid_study_id',
    'deidentify_study',
    'derive_shift',
    'pseudonym',
    'resolve_entry',
    'update_map',
]
