"""Polarized element-pair codes for polarization-adjusted FFMA over a Gaussian MAC."""

from .channel import LLR_MAX, PowerProfile, gmac_transmit, init_llrs, modulate, parity_posteriors
from .epcode import (
    CodeParams,
    EpCodeSpec,
    assign_eps,
    encode_frame,
    encode_user,
    encode_user_nonsystematic,
    ffsp_sum,
    pack_w,
    unpack_w,
)
from .gf2 import BitMatrix, ColumnPermutation, crc_generator, gf2_invert, gf2_mul, kronecker, systematic_transform

__version__ = "0.1.0"
