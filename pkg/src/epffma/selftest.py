"""Built-in reproduction checks for the small worked examples and oracle equivalences.

Each check returns ``(name, ok, detail)``; ``detail`` carries a readable diff
when a check fails.
"""

from __future__ import annotations

import numpy as np

from .channel import PowerProfile, cfsp, modulate
from .decoders.bmd import candidate_cfsp
from .decoders.topl import top_l
from .epcode import (CodeParams, EpCodeSpec, encode_frame, encode_user_nonsystematic, ffsp_sum,
                     pack_w, polar_transform)
from .gf2 import BitMatrix, gf2_invert, gf2_mul, kronecker_array

EXAMPLE_A = (3, 5, 6, 7)

KRON2 = np.array([[1, 0, 0, 0],
                  [1, 1, 0, 0],
                  [1, 0, 1, 0],
                  [1, 1, 1, 1]], dtype=np.uint8)

KRON3 = np.array([[1, 0, 0, 0, 0, 0, 0, 0],
                  [1, 1, 0, 0, 0, 0, 0, 0],
                  [1, 0, 1, 0, 0, 0, 0, 0],
                  [1, 1, 1, 1, 0, 0, 0, 0],
                  [1, 0, 0, 0, 1, 0, 0, 0],
                  [1, 1, 0, 0, 1, 1, 0, 0],
                  [1, 0, 1, 0, 1, 0, 1, 0],
                  [1, 1, 1, 1, 1, 1, 1, 1]], dtype=np.uint8)

G_M1 = np.array([[1, 1, 1, 1, 0, 0, 0, 0],
                 [1, 1, 0, 0, 1, 1, 0, 0],
                 [1, 0, 1, 0, 1, 0, 1, 0],
                 [1, 1, 1, 1, 1, 1, 1, 1]], dtype=np.uint8)

G_AA_INV = np.array([[1, 0, 0, 0],
                     [0, 1, 0, 0],
                     [0, 0, 1, 0],
                     [1, 1, 1, 1]], dtype=np.uint8)

G_STEP1 = np.array([[1, 1, 1, 1, 0, 0, 0, 0],
                    [1, 1, 0, 0, 1, 1, 0, 0],
                    [1, 0, 1, 0, 1, 0, 1, 0],
                    [0, 1, 1, 0, 1, 0, 0, 1]], dtype=np.uint8)

G_SYM = np.array([[1, 0, 0, 0, 1, 1, 1, 0],
                  [0, 1, 0, 0, 1, 1, 0, 1],
                  [0, 0, 1, 0, 1, 0, 1, 1],
                  [0, 0, 0, 1, 0, 1, 1, 1]], dtype=np.uint8)

# single user, two EPs, non-systematic: payload (bit for C_1, bit for C_2) -> element
ENCODINGS = {(1, 0): (1, 1, 1, 1, 0, 0, 0, 0),
             (0, 1): (1, 1, 0, 0, 1, 1, 0, 0),
             (1, 1): (0, 0, 1, 1, 1, 1, 0, 0)}

TOPL_WEIGHTS = (1.0, 2.0, 4.0, 5.0)
TOPL_EXPECTED = ((), (0,), (1,), (0, 1), (2,))

TWO_USER_BITS = ((1, 0), (0, 1))
TWO_USER_C = ((1, 0, 0, 0, 1, 1, 1, 0), (0, 0, 0, 1, 0, 1, 1, 1))
TWO_USER_X = ((-1, 1, 0, 0, -1, -1, -1, 1), (0, 0, 1, -1, 1, -1, -1, -1))
TWO_USER_R = ((-1, 1, 1, -1, 0, -2, -2, 0), (-1, -1, 1, -1, 2, 0, -2, -2))


def _diff(name, got, want) -> str:
    got, want = np.asarray(got), np.asarray(want)
    if got.shape != want.shape:
        return f"{name}: shape {got.shape} != expected {want.shape}"
    bad = np.argwhere(got != want)
    lines = [f"{name}: {len(bad)} mismatching entries"]
    for idx in bad[:8]:
        t = tuple(int(i) for i in idx)
        lines.append(f"  at {t}: got {got[t]}, expected {want[t]}")
    return "\n".join(lines)


def _check(name, got, want):
    ok = np.array_equal(np.asarray(got), np.asarray(want))
    return name, ok, "" if ok else _diff(name, got, want)


def structural_checks(A=EXAMPLE_A):
    spec = EpCodeSpec.build(CodeParams(3, 1, 4, n_eps=4), A)
    inv = gf2_invert(spec.g_m1.take_cols(list(spec.A)))
    return [
        _check("kronecker(2)", kronecker_array(2), KRON2),
        _check("kronecker(3)", kronecker_array(3), KRON3),
        _check("full-one generator", spec.g_m1.to_array(), G_M1),
        _check("G_AA inverse", inv.to_array(), G_AA_INV),
        _check("left-multiplied generator", gf2_mul(inv, spec.g_m1).to_array(), G_STEP1),
        _check("systematic generator", spec.g_msym.to_array(), G_SYM),
    ]


def encoding_checks(A=EXAMPLE_A):
    out = []
    spec1 = EpCodeSpec.build(CodeParams(3, 1, 2, n_eps=4), A)
    for bits, want in ENCODINGS.items():
        out.append(_check(f"non-systematic element b={bits}",
                          encode_user_nonsystematic(spec1, 1, bits), want))
    flips = top_l(np.array(TOPL_WEIGHTS), 5)
    out.append(_check("top-5 flip sets", np.array([str(f.indices) for f in flips]),
                      np.array([str(t) for t in TOPL_EXPECTED])))
    spec2 = EpCodeSpec.build(CodeParams(3, 2, 2), A)
    cs = encode_frame(spec2, np.array(TWO_USER_BITS))
    out.append(_check("two-user elements", cs, TWO_USER_C))
    unit = PowerProfile(1.0, 1.0, 1.0, 1.0)
    x = np.stack([modulate(spec2, cs[j], j + 1, unit) for j in range(2)])
    out.append(_check("two-user modulated signals", x, TWO_USER_X))
    out.append(_check("noiseless superposition", cfsp(spec2, cs), TWO_USER_R[0]))
    w = pack_w(spec2, np.array(TWO_USER_BITS))
    r, _ = candidate_cfsp(spec2, w, [(), (1,)])
    out.append(_check("re-encoded candidates", r, TWO_USER_R))
    return out


def oracle_checks(n_frames: int = 200, seed: int = 0):
    rng = np.random.default_rng(seed)
    out = []
    spec = EpCodeSpec.build(CodeParams(4, 2, 2, crc_len=4), (3, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15, 8))
    A = list(spec.A)
    g = kronecker_array(spec.kappa)
    inv = gf2_invert(BitMatrix.from_array(g[np.ix_(A, A)])).to_array().astype(np.int64)
    mism = 0
    for _ in range(n_frames):
        data = rng.integers(0, 2, (spec.J, spec.K), dtype=np.uint8)
        v = ffsp_sum(encode_frame(spec, data))
        w = pack_w(spec, data)
        via_sym = (w.astype(np.int64) @ spec.sym_array) & 1
        d = np.zeros(spec.m, dtype=np.uint8)
        d[A] = (w.astype(np.int64) @ inv) & 1
        nat = np.empty(spec.m, dtype=np.uint8)
        nat[spec.perm.perm] = v
        mism += int(not (np.array_equal(v, via_sym) and np.array_equal(polar_transform(d), nat)))
    out.append(("FFSP three-way equality", mism == 0, f"{mism} mismatching frames" if mism else ""))
    return out


def run_selftest(A=EXAMPLE_A, n_frames: int = 200, seed: int = 0):
    return structural_checks(A) + encoding_checks(A) + oracle_checks(n_frames, seed)


def format_report(results) -> str:
    lines = []
    for name, ok, detail in results:
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}")
        if detail:
            lines.extend("      " + ln for ln in detail.splitlines())
    return "\n".join(lines)
