"""CRC-aided successive cancellation list decoding of the superposed FFSP block.

The list kernel follows the LLR formulation with min-sum ``f`` and the
hardware-friendly path metric (add ``|l|`` when a decision disagrees with the
LLR sign).  Lazy copying is realized with one row-pointer table per layer:
cloning a path only rewrites pointers, and a layer is recomputed for all
surviving paths at once, so stale pointers never need copying.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..channel import LLR_MAX, PowerProfile, init_llrs
from ..epcode import EpCodeSpec, crc_ok, unpack_w
from .result import DecodeResult


@njit(cache=True)
def _scl_kernel(llr, frozen, L, alpha, bl, br, out, pm):
    m = llr.shape[0]
    n = 0
    while (1 << n) < m:
        n += 1
    aperm = np.empty((n + 1, L), dtype=np.int64)
    bpl = np.empty((n + 1, L), dtype=np.int64)
    bpr = np.empty((n + 1, L), dtype=np.int64)
    for lam in range(n + 1):
        for l in range(L):
            aperm[lam, l] = l
            bpl[lam, l] = l
            bpr[lam, l] = l
    tmp = np.empty((n + 1, L), dtype=np.int64)
    cand = np.empty(2 * L)
    pm[0] = 0.0
    act = 1

    for phi in range(m):
        # ---- LLRs down to the leaf
        if phi == 0:
            lam0 = 1
        else:
            tz = 0
            while (phi >> tz) & 1 == 0:
                tz += 1
            lam0 = n - tz
        for lam in range(lam0, n + 1):
            N = m >> lam
            right = phi != 0 and lam == lam0
            for l in range(act):
                if lam == 1:
                    src = llr
                    off = 0
                else:
                    src = alpha[aperm[lam - 1, l]]
                    off = 2 * N
                dst = alpha[l]
                if right:
                    u = bl[bpl[lam, l]]
                    for k in range(N):
                        a = src[off + k]
                        b = src[off + N + k]
                        v = b - a if u[N + k] else b + a
                        if v > LLR_MAX:
                            v = LLR_MAX
                        elif v < -LLR_MAX:
                            v = -LLR_MAX
                        dst[N + k] = v
                else:
                    for k in range(N):
                        a = src[off + k]
                        b = src[off + N + k]
                        mag = min(abs(a), abs(b))
                        dst[N + k] = mag if (a >= 0) == (b >= 0) else -mag
            for l in range(L):
                aperm[lam, l] = l

        # ---- decision
        leaf = bl if phi % 2 == 0 else br
        leafp = bpl if phi % 2 == 0 else bpr
        if frozen[phi]:
            for l in range(act):
                a = alpha[l, 1]
                if a < 0:
                    pm[l] -= a
                leaf[l, 1] = 0
        else:
            for l in range(act):
                a = alpha[l, 1]
                if a < 0:
                    cand[2 * l] = pm[l] - a
                    cand[2 * l + 1] = pm[l]
                else:
                    cand[2 * l] = pm[l]
                    cand[2 * l + 1] = pm[l] + a
            nc = 2 * act
            order = np.argsort(cand[:nc], kind="mergesort")
            new_act = min(nc, L)
            for lam in range(n + 1):
                for l in range(new_act):
                    tmp[lam, l] = aperm[lam, order[l] // 2]
                for l in range(new_act):
                    aperm[lam, l] = tmp[lam, l]
                for l in range(new_act):
                    tmp[lam, l] = bpl[lam, order[l] // 2]
                for l in range(new_act):
                    bpl[lam, l] = tmp[lam, l]
                for l in range(new_act):
                    tmp[lam, l] = bpr[lam, order[l] // 2]
                for l in range(new_act):
                    bpr[lam, l] = tmp[lam, l]
            for l in range(new_act):
                pm[l] = cand[order[l]]
                leaf[l, 1] = order[l] % 2
            act = new_act
        for l in range(L):
            leafp[n, l] = l

        # ---- partial sums back up while the finished node is a right child
        lam = n
        idx = phi
        while idx % 2 == 1 and lam >= 1:
            N = m >> lam
            pidx = idx >> 1
            to_left = pidx % 2 == 0 or lam == 1
            target = bl if to_left else br
            for l in range(act):
                left = bl[bpl[lam, l]]
                rgt = br[bpr[lam, l]]
                dst = target[l]
                for k in range(N):
                    dst[2 * N + k] = left[N + k] ^ rgt[N + k]
                    dst[3 * N + k] = rgt[N + k]
            if to_left:
                for l in range(L):
                    bpl[lam - 1, l] = l
            else:
                for l in range(L):
                    bpr[lam - 1, l] = l
            lam -= 1
            idx = pidx

    for l in range(act):
        row = bl[bpl[0, l]]
        for k in range(m):
            out[l, k] = row[m + k]
    return act


class SclDecoder:
    """Reusable list decoder bound to one code; buffers persist across frames."""

    def __init__(self, spec: EpCodeSpec, L: int):
        if L < 1 or L & (L - 1):
            raise ValueError(f"list size must be a power of two, got {L}")
        self.spec = spec
        self.L = L
        m = spec.m
        self._alpha = np.zeros((L, 2 * m))
        self._bl = np.zeros((L, 2 * m), dtype=np.uint8)
        self._br = np.zeros((L, 2 * m), dtype=np.uint8)
        self._out = np.zeros((L, m), dtype=np.uint8)
        self._pm = np.zeros(L)
        if spec.M:
            self._inv = spec.perm.inverse().perm
            self._frozen = spec.frozen_mask

    def list_decode(self, llr_tx) -> tuple[np.ndarray, np.ndarray]:
        """Surviving codewords in transmit order, sorted by path metric, and their metrics."""
        spec = self.spec
        llr_nat = np.empty(spec.m)
        llr_nat[spec.perm.perm] = llr_tx
        act = _scl_kernel(llr_nat, self._frozen, self.L, self._alpha, self._bl, self._br,
                          self._out, self._pm)
        pm = self._pm[:act].copy()
        order = np.argsort(pm, kind="stable")
        words = self._out[:act][order][:, spec.perm.perm]
        return words, pm[order]

    def decode_llrs(self, llr_tx) -> DecodeResult:
        spec = self.spec
        if spec.M == 0:
            return DecodeResult.empty(spec)
        words, pms = self.list_decode(llr_tx)
        blocks = unpack_w(spec, words[:, :spec.M])
        ok = np.atleast_2d(crc_ok(spec, blocks))
        passing = np.nonzero(ok.all(axis=1))[0]
        pick = int(passing[0]) if len(passing) else 0
        w = words[pick, :spec.M].copy()
        return DecodeResult.from_w(spec, w, float(pms[pick]))

    def decode(self, y, p: PowerProfile) -> DecodeResult:
        return self.decode_llrs(init_llrs(y, self.spec, p))


def scl_decode(y, spec: EpCodeSpec, p: PowerProfile, L: int) -> DecodeResult:
    return SclDecoder(spec, L).decode(y, p)
