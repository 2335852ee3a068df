"""Top-L bifurcated minimum distance (Top-L-BMD) detection.

Phase I ranks flip sets of the hard-decided information block by the sum of
flipped |LLR| values.  Phase II re-encodes the hard decision once and derives
every candidate by XOR-ing the flipped generator rows into the owning user's
output element, then picks the candidate whose noiseless superposition is
closest to the received block.
"""

from __future__ import annotations

import numpy as np

from ..channel import PowerProfile, info_llrs
from ..epcode import EpCodeSpec
from .result import DecodeResult
from .topl import FlipSet, top_l


def _flip_matrix(spec: EpCodeSpec, flip_sets) -> np.ndarray:
    F = np.zeros((len(flip_sets), spec.used), dtype=np.int64)
    for r, fs in enumerate(flip_sets):
        idx = fs.indices if isinstance(fs, FlipSet) else tuple(fs)
        if idx:
            if min(idx) < 0 or max(idx) >= spec.used:
                raise ValueError(f"flip index out of range 0..{spec.used - 1}")
            F[r, list(idx)] = 1
    return F


def _syndrome_rows(spec: EpCodeSpec) -> np.ndarray:
    """Effect of flipping each bit of a B-bit block on its CRC syndrome."""
    return np.vstack([spec.crc_parity, np.eye(spec.crc_len, dtype=np.uint8)]).astype(np.int64)


def candidate_cfsp(spec: EpCodeSpec, w_hat, flip_sets) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled CFSP blocks of all candidates and their per-user CRC flags.

    ``w_hat`` is the hard-decided block of the J*B assigned positions.  The
    base output elements are encoded once; each candidate updates only the
    users it touches: c_j' = c_j xor (sum of flipped rows), r' = r - x_j + x_j'.
    """
    spec_used = spec.used
    w_hat = np.asarray(w_hat, dtype=np.uint8)[:spec_used]
    J, B, K, M = spec.J, spec.B, spec.K, spec.M
    blocks = w_hat.reshape(J, B)
    base_c = np.zeros((J, spec.m), dtype=np.uint8)
    for j in range(J):
        base_c[j, j * B:(j + 1) * B] = blocks[j]
        if spec.R:
            base_c[j, M:] = (blocks[j].astype(np.int64) @ spec.parity_rows[j * B:(j + 1) * B]) & 1
    sign = 1 - 2 * w_hat.astype(np.int64)

    F = _flip_matrix(spec, flip_sets)
    n = len(F)
    r = np.zeros((n, spec.m), dtype=np.int64)
    r[:, :spec_used] = sign * (1 - 2 * F)
    ok = np.ones((n, J), dtype=bool)
    syn_rows = _syndrome_rows(spec) if spec.crc_len else None
    parity_sum = np.zeros((n, spec.R), dtype=np.int64)
    for j in range(J):
        Fj = F[:, j * B:(j + 1) * B]
        cj = base_c[j, M:].astype(np.int64)
        if spec.R:
            delta = (Fj @ spec.parity_rows[j * B:(j + 1) * B]) & 1
            parity_sum += 1 - 2 * (cj ^ delta)
        if spec.crc_len:
            base_syn = ((blocks[j, :K].astype(np.int64) @ spec.crc_parity) & 1) ^ blocks[j, K:]
            syn = base_syn ^ ((Fj @ syn_rows) & 1)
            ok[:, j] = ~syn.any(axis=1)
    r[:, M:] = parity_sum
    return r, ok


def _amplitudes(spec: EpCodeSpec, p: PowerProfile) -> np.ndarray:
    amp = np.zeros(spec.m)
    amp[:spec.used] = p.amp_inf
    amp[spec.M:] = p.amp_red
    return amp


def bmd_phase2(y, spec: EpCodeSpec, p: PowerProfile, flip_sets, metric: str = "l2") -> DecodeResult:
    """Pick the flip set whose re-encoded superposition lies closest to ``y``.

    Candidates failing any per-user CRC are discarded unless all of them fail.
    """
    if metric not in ("l2", "l1"):
        raise ValueError("metric must be 'l2' or 'l1'")
    y = np.asarray(y, dtype=float)
    if spec.used == 0:
        return DecodeResult.empty(spec)
    hard = (info_llrs(y[:spec.used], p.amp_inf, p.sigma2) < 0).astype(np.uint8)
    flip_sets = list(flip_sets) or [FlipSet((), 0.0)]
    r, ok = candidate_cfsp(spec, hard, flip_sets)
    resid = y - r * _amplitudes(spec, p)
    dist = np.sum(resid ** 2, axis=1) if metric == "l2" else np.sum(np.abs(resid), axis=1)
    valid = ok.all(axis=1)
    scored = np.where(valid, dist, np.inf) if valid.any() else dist
    best = int(np.argmin(scored))
    fs = flip_sets[best]
    idx = list(fs.indices if isinstance(fs, FlipSet) else fs)
    w = np.zeros(spec.M, dtype=np.uint8)
    w[:spec.used] = hard
    w[idx] ^= 1
    return DecodeResult.from_w(spec, w, float(dist[best]))


def topl_bmd_decode(y, spec: EpCodeSpec, p: PowerProfile, L: int, metric: str = "l2") -> DecodeResult:
    y = np.asarray(y, dtype=float)
    if spec.used == 0:
        return DecodeResult.empty(spec)
    llr = info_llrs(y[:spec.used], p.amp_inf, p.sigma2)
    n = spec.used
    L_eff = L if n >= 63 else min(L, 1 << n)
    return bmd_phase2(y, spec, p, top_l(np.abs(llr), L_eff), metric)


class BmdDecoder:
    def __init__(self, spec: EpCodeSpec, L: int, metric: str = "l2"):
        self.spec, self.L, self.metric = spec, L, metric

    def decode(self, y, p: PowerProfile) -> DecodeResult:
        return topl_bmd_decode(y, self.spec, p, self.L, self.metric)
