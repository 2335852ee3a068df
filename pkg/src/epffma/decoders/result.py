from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..epcode import EpCodeSpec, crc_ok, unpack_w


@dataclass
class DecodeResult:
    w_hat: np.ndarray
    per_user_bits: np.ndarray
    per_user_crc_ok: np.ndarray
    metric: float

    @classmethod
    def from_w(cls, spec: EpCodeSpec, w_hat, metric: float) -> "DecodeResult":
        w_hat = np.asarray(w_hat, dtype=np.uint8)
        blocks = unpack_w(spec, w_hat)
        ok = np.atleast_1d(crc_ok(spec, blocks))
        return cls(w_hat, blocks[:, :spec.K].copy(), ok, metric)

    @classmethod
    def empty(cls, spec: EpCodeSpec) -> "DecodeResult":
        return cls(np.zeros(0, dtype=np.uint8), np.zeros((spec.J, 0), dtype=np.uint8),
                   np.ones(spec.J, dtype=bool), 0.0)
