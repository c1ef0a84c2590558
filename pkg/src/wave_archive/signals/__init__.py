from .quantization import INVALID, Quantization, checksum16, choose_quantization, dequantize, quantize
from .records import RecordData, SignalRecord, read_record, write_record
from .study_folder import DETAILS_FILE, PackedStudy, StudyFolder, pack_study, verify_pack, write_study_folder

__all__ = [
    'DETAILS_FILE',
    'INVALID',
    'PackedStudy',
    'Quantization',
    'RecordData',
    'SignalRecord',
    'StudyFolder',
    'checksum16',
    'choose_quantization',
    'dequantize',
    'pack_study',
    'quantize',
    'read_record',
    'verify_pack',
    'write_record',
    'write_study_folder',
]
