from .bmd import BmdDecoder, bmd_phase2, candidate_cfsp, topl_bmd_decode
from .result import DecodeResult
from .scl import SclDecoder, scl_decode
from .topl import FlipSet, pm_exact, pm_of, pm_shifted, top_l

__all__ = [
    "BmdDecoder",
    "DecodeResult",
    "FlipSet",
    "SclDecoder",
    "bmd_phase2",
    "candidate_cfsp",
    "pm_exact",
    "pm_of",
    "pm_shifted",
    "scl_decode",
    "top_l",
    "topl_bmd_decode",
]
