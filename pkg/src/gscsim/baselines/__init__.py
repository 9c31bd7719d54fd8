from .qam import qam_modulate, qam_demodulate, CONSTELLATION
from .ldpc import LdpcCode
from .classical import (ClassicalConfig, DecodeOutcome, DecodeStatus,
                        jpeg_encode, jpeg_decode, jpeg_roundtrip,
                        classical_pipeline)
from .deepjscc import DeepJsccModel, train_deepjscc

__all__ = [
    "qam_modulate", "qam_demodulate", "CONSTELLATION", "LdpcCode",
    "ClassicalConfig", "DecodeOutcome", "DecodeStatus", "jpeg_encode",
    "jpeg_decode", "jpeg_roundtrip", "classical_pipeline",
    "DeepJsccModel", "train_deepjscc",
]
