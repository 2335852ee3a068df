"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

The BER criteria (8a-8c) run 5000 frames per point and dominate the runtime.
"""

import itertools
import math
import time

import numpy as np
import pytest

from epffma import harness
from epffma.capacity import capacity_mi, cfsp_entropy, optimize_pas
from epffma.channel import PowerProfile, cfsp, gmac_transmit, modulate, n0_for_bit_snr
from epffma.construction import construct_index_set, polarization_weight_order
from epffma.decoders import BmdDecoder, SclDecoder, candidate_cfsp, top_l, topl_bmd_decode
from epffma.decoders.bmd import _amplitudes
from epffma.epcode import (CodeParams, EpCodeSpec, append_crc, crc_ok, encode_frame, encode_user_nonsystematic,
                           ffsp_sum, pack_w, polar_transform)
from epffma.gf2 import BitMatrix, gf2_invert, gf2_mul, kronecker, kronecker_array

A_EX = (3, 5, 6, 7)


def pw_spec(kappa, J, K, crc_len=0, n_eps=None):
    params = CodeParams(kappa, J, K, crc_len, n_eps=n_eps)
    pw = polarization_weight_order(kappa)
    return EpCodeSpec.build(params, np.argsort(-pw, kind="stable")[:params.M])


def send(spec, data, p, rng):
    cs = encode_frame(spec, data)
    xs = np.stack([modulate(spec, cs[j], j + 1, p) for j in range(spec.J)])
    return gmac_transmit(xs, p, rng)[0]


def full_cfsp(spec, w_used):
    B = spec.B
    r = np.zeros(spec.m, dtype=int)
    for j in range(spec.J):
        c = (w_used[j * B:(j + 1) * B].astype(int) @ spec.sym_array[j * B:(j + 1) * B]) % 2
        x = 1 - 2 * c
        keep = np.zeros(spec.m, dtype=bool)
        keep[j * B:(j + 1) * B] = True
        keep[spec.M:] = True
        r += np.where(keep, x, 0)
    return r


# --------------------------------------------------------------------------- 1
def test_criterion_1_structure(criterion):
    t0 = time.perf_counter()
    k2 = [[1, 0, 0, 0], [1, 1, 0, 0], [1, 0, 1, 0], [1, 1, 1, 1]]
    k3 = [[1, 0, 0, 0, 0, 0, 0, 0], [1, 1, 0, 0, 0, 0, 0, 0], [1, 0, 1, 0, 0, 0, 0, 0], [1, 1, 1, 1, 0, 0, 0, 0],
          [1, 0, 0, 0, 1, 0, 0, 0], [1, 1, 0, 0, 1, 1, 0, 0], [1, 0, 1, 0, 1, 0, 1, 0], [1, 1, 1, 1, 1, 1, 1, 1]]
    gm1 = [[1, 1, 1, 1, 0, 0, 0, 0], [1, 1, 0, 0, 1, 1, 0, 0], [1, 0, 1, 0, 1, 0, 1, 0], [1, 1, 1, 1, 1, 1, 1, 1]]
    left = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [1, 1, 1, 1]]
    prod = [[1, 1, 1, 1, 0, 0, 0, 0], [1, 1, 0, 0, 1, 1, 0, 0], [1, 0, 1, 0, 1, 0, 1, 0], [0, 1, 1, 0, 1, 0, 0, 1]]
    sym = [[1, 0, 0, 0, 1, 1, 1, 0], [0, 1, 0, 0, 1, 1, 0, 1], [0, 0, 1, 0, 1, 0, 1, 1], [0, 0, 0, 1, 0, 1, 1, 1]]
    spec = EpCodeSpec.build(CodeParams(3, 1, 4, n_eps=4), A_EX)
    inv = gf2_invert(kronecker(3).take_rows(A_EX).take_cols(A_EX))
    checks = {
        "kronecker(2)": kronecker(2).to_array().tolist() == k2,
        "kronecker(3)": kronecker(3).to_array().tolist() == k3,
        "G_M^1": spec.g_m1.to_array().tolist() == gm1,
        "left factor": inv.to_array().tolist() == left,
        "product": gf2_mul(inv, spec.g_m1).to_array().tolist() == prod,
        "systematic": spec.g_msym.to_array().tolist() == sym,
    }
    dt = time.perf_counter() - t0
    ok = all(checks.values()) and dt < 1.0
    bad = [k for k, v in checks.items() if not v]
    criterion(1, ok, f"{len(checks) - len(bad)}/{len(checks)} exact, {dt:.3f} s" + (f", failed {bad}" if bad else ""))
    assert ok


# --------------------------------------------------------------------------- 2
def test_criterion_2_worked_examples(criterion):
    t0 = time.perf_counter()
    s1 = EpCodeSpec.build(CodeParams(3, 1, 2, n_eps=4), A_EX)
    s2 = EpCodeSpec.build(CodeParams(3, 2, 2), A_EX)
    cs = encode_frame(s2, [[1, 0], [0, 1]])
    unit = PowerProfile(1.0, 1.0, 1.0, 1.0)
    r, _ = candidate_cfsp(s2, pack_w(s2, [[1, 0], [0, 1]]), [(), (1,)])
    checks = {
        "encodings": [encode_user_nonsystematic(s1, 1, b).tolist() for b in ([1, 0], [0, 1], [1, 1])]
        == [[1, 1, 1, 1, 0, 0, 0, 0], [1, 1, 0, 0, 1, 1, 0, 0], [0, 0, 1, 1, 1, 1, 0, 0]],
        "top-L": [f.indices for f in top_l([1, 2, 4, 5], 5)] == [(), (0,), (1,), (0, 1), (2,)],
        "c vectors": cs.tolist() == [[1, 0, 0, 0, 1, 1, 1, 0], [0, 0, 0, 1, 0, 1, 1, 1]],
        "x vectors": [modulate(s2, cs[j], j + 1, unit).tolist() for j in range(2)]
        == [[-1, 1, 0, 0, -1, -1, -1, 1], [0, 0, 1, -1, 1, -1, -1, -1]],
        "r_hat": r.tolist() == [[-1, 1, 1, -1, 0, -2, -2, 0], [-1, -1, 1, -1, 2, 0, -2, -2]]
        and cfsp(s2, cs).tolist() == r[0].tolist(),
    }
    dt = time.perf_counter() - t0
    ok = all(checks.values()) and dt < 1.0
    bad = [k for k, v in checks.items() if not v]
    criterion(2, ok, f"{len(checks) - len(bad)}/{len(checks)} exact, {dt:.3f} s" + (f", failed {bad}" if bad else ""))
    assert ok


# --------------------------------------------------------------------------- 3
def _ffsp_mismatches(rng, n_frames):
    bad = 0
    specs = []
    for kappa in (3, 4, 5, 6, 7, 8):
        for J, K, crc in ((1, 2, 0), (2, 3, 4), (3, 8, 8), (5, 6, 0)):
            params = CodeParams(kappa, J, K, crc) if J * (K + crc) <= (1 << kappa) else None
            if params:
                A = rng.choice(params.m, params.M, replace=False)
                spec = EpCodeSpec.build(params, A)
                Al = list(spec.A)
                inv = gf2_invert(BitMatrix.from_array(kronecker_array(kappa)[np.ix_(Al, Al)])).to_array()
                specs.append((spec, Al, inv.astype(int)))
    for f in range(n_frames):
        spec, Al, inv = specs[f % len(specs)]
        data = rng.integers(0, 2, (spec.J, spec.K), dtype=np.uint8)
        v = ffsp_sum(encode_frame(spec, data))
        w = pack_w(spec, data)
        via_gen = (w.astype(int) @ spec.sym_array) % 2
        via_full = (data.reshape(-1).astype(int) @ spec.g_full.to_array()) % 2
        d = np.zeros(spec.m, dtype=np.uint8)
        d[Al] = (w.astype(int) @ inv) % 2
        nat = np.empty(spec.m, dtype=np.uint8)
        nat[spec.perm.perm] = v
        ok = (np.array_equal(v, via_gen) and np.array_equal(v, via_full)
              and np.array_equal(polar_transform(d), nat))
        bad += not ok
    return bad


def _brute_top(w, L):
    n = len(w)
    sums = np.zeros(1)
    for i in range(n):
        sums = np.concatenate([sums, sums + w[i]])
    masks = np.argsort(sums, kind="stable")[:L]
    return [tuple(i for i in range(n) if (int(mk) >> i) & 1) for mk in masks]


def _topl_mismatches(rng):
    bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 21))
        L = int(min(rng.integers(1, 1025), 1 << n))
        w = rng.exponential(1.0, n)
        got = [f.indices for f in top_l(w, L)]
        bad += got != _brute_top(w, L)
    return bad


def _reencode_mismatches(rng, n_frames):
    bad = 0
    specs = [pw_spec(6, 3, 8, 8), pw_spec(7, 5, 10, 4, n_eps=96), pw_spec(5, 2, 6, 0)]
    for f in range(n_frames):
        spec = specs[f % len(specs)]
        w = rng.integers(0, 2, spec.used, dtype=np.uint8)
        flips = [tuple(sorted(rng.choice(spec.used, rng.integers(0, 6), replace=False).tolist())) for _ in range(4)]
        r, ok = candidate_cfsp(spec, w, flips)
        for row, fl, okr in zip(r, flips, ok):
            w2 = w.copy()
            w2[list(fl)] ^= 1
            want_ok = crc_ok(spec, w2.reshape(spec.J, spec.B)) if spec.crc_len else np.ones(spec.J, bool)
            bad += not (np.array_equal(row, full_cfsp(spec, w2)) and np.array_equal(okr, want_ok))
    return bad


def _ml_mismatches(rng, n_frames):
    bad = 0
    cases = [pw_spec(4, 2, 5, 0), pw_spec(4, 1, 6, 4), pw_spec(5, 2, 4, 0), pw_spec(5, 5, 2, 0)]
    for f in range(n_frames):
        spec = cases[f % len(cases)]
        p = PowerProfile.from_pas(spec, 2.0, 1.0, 2.5)
        data = rng.integers(0, 2, (spec.J, spec.K), dtype=np.uint8)
        y = send(spec, data, p, rng)
        res = topl_bmd_decode(y, spec, p, 1 << spec.used, "l2")
        amp = _amplitudes(spec, p)
        best, best_d = None, np.inf
        for bits in itertools.product((0, 1), repeat=spec.J * spec.K):
            dd = np.array(bits, dtype=np.uint8).reshape(spec.J, spec.K)
            dist = np.sum((y - full_cfsp(spec, append_crc(spec, dd).reshape(-1)) * amp) ** 2)
            if dist < best_d:
                best, best_d = dd, dist
        bad += not np.array_equal(res.per_user_bits, best)
    return bad


def test_criterion_3_oracles(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    counts = {"ffsp": _ffsp_mismatches(rng, 10_000), "top_l": _topl_mismatches(rng),
              "re-encode": _reencode_mismatches(rng, 1000), "ml": _ml_mismatches(rng, 200)}
    dt = time.perf_counter() - t0
    ok = not any(counts.values()) and dt < 300
    criterion(3, ok, f"mismatches {counts}, {dt:.1f} s")
    assert ok


# --------------------------------------------------------------------------- 4
def test_criterion_4_noiseless(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    errors = 0
    frames = 0
    for spec in (pw_spec(4, 2, 2, 4), pw_spec(5, 3, 4, 0), pw_spec(4, 1, 8, 4)):
        assert spec.used <= 12
        p = PowerProfile.from_pas(spec, 2.0, 1.0, 1e-6)
        decs = [SclDecoder(spec, 8), BmdDecoder(spec, 8)]
        for bits in itertools.product((0, 1), repeat=spec.J * spec.K):
            data = np.array(bits, dtype=np.uint8).reshape(spec.J, spec.K)
            y = send(spec, data, p, rng)
            for d in decs:
                errors += not np.array_equal(d.decode(y, p).per_user_bits, data)
            frames += 1
    spec = pw_spec(10, 5, 64, 8, n_eps=960)
    p = PowerProfile.from_pas(spec, 4.0, 1.0, 1e-6)
    decs = [SclDecoder(spec, 512), BmdDecoder(spec, 512)]
    for _ in range(1000):
        data = rng.integers(0, 2, (5, 64), dtype=np.uint8)
        y = send(spec, data, p, rng)
        for d in decs:
            errors += not np.array_equal(d.decode(y, p).per_user_bits, data)
        frames += 1
    dt = time.perf_counter() - t0
    criterion(4, errors == 0, f"{errors} decoding errors over {frames} frames x 2 decoders, {dt:.1f} s")
    assert errors == 0


# --------------------------------------------------------------------------- 5
def test_criterion_5_capacity(criterion):
    t0 = time.perf_counter()
    gaps = {}
    for J in (2, 5, 15):
        p = PowerProfile(1.0, 1.0 / 10 ** 3, 1.0, 1.0)  # Eb/N0 = 30 dB with Eb = P
        gaps[J] = abs(capacity_mi(J, 1.0, p) - cfsp_entropy(J)) / cfsp_entropy(J)
    below = all(cfsp_entropy(J) < math.log2(J + 1) for J in (2, 5, 15, 30, 50, 300))
    dt = time.perf_counter() - t0
    ok = all(g <= 0.01 for g in gaps.values()) and below and dt < 120
    criterion(5, ok, "relative gap to H(R) " + ", ".join(f"J={J}: {g:.2e}" for J, g in gaps.items())
              + f"; H(R) < log2(J+1): {below}; {dt:.1f} s")
    assert ok


# --------------------------------------------------------------------------- 6
def test_criterion_6_pas_optimum(criterion):
    t0 = time.perf_counter()
    spec = CodeParams(10, 30, 32, n_eps=992)
    grid = list(range(2, 39, 4))
    best, curve = optimize_pas(spec, grid, n0_for_bit_snr(spec, 5.0), n_samples=10_000,
                               rng=np.random.default_rng(6))
    dt = time.perf_counter() - t0
    ok = abs(best - 14) <= 4 and dt < 600
    criterion(6, ok, f"mu_pas* = {best:g} on grid {grid[0]}..{grid[-1]} step 4, {dt:.1f} s")
    assert ok


# --------------------------------------------------------------------------- 7
def test_criterion_7_polarization(criterion):
    t0 = time.perf_counter()
    params = CodeParams(10, 30, 32, n_eps=992)
    n0 = n0_for_bit_snr(params, 5.0)
    counts = {}
    for mu in (1.0, 14.0):
        p = PowerProfile.from_pas(params, mu, 1.0, n0)
        _, prof = construct_index_set(params, p, 2000, np.random.default_rng(7))
        hi, lo = prof.count_above(0.99), prof.count_below(0.01)
        counts[mu] = (hi, lo, params.m - hi - lo)
    dt = time.perf_counter() - t0
    ok = counts[14.0][0] > counts[1.0][0] and counts[14.0][1] > counts[1.0][1] and dt < 600
    criterion(7, ok, f"(I>0.99, I<0.01, between): mu=14 {counts[14.0]} vs mu=1 {counts[1.0]}, {dt:.1f} s")
    assert ok


# --------------------------------------------------------------------------- 8
BER_FRAMES = 5000


def ber_point(K, n_eps, ebn0, kind, mu_pas, seed):
    cfg = harness.ExperimentConfig.from_dict({
        "code": {"kappa": 10, "J": 5, "K": K, "crc_len": 8, "n_eps": n_eps},
        "channel": {"ebn0_db": [ebn0], "mu_pas": mu_pas},
        "construction": {"samples": 2000},
        "decoder": {"kind": kind, "L": 512},
        "trials": {"min_frames": BER_FRAMES, "max_frames": BER_FRAMES, "chunk": 250},
        "seed": seed})
    return harness.run_ber_sweep(cfg)[0]


def within_3_sigma(a, b, bits_per_frame):
    na, nb = a.frames * bits_per_frame, b.frames * bits_per_frame
    pooled = (a.bit_errors + b.bit_errors) / (na + nb)
    sigma = math.sqrt(pooled * (1 - pooled) * (1 / na + 1 / nb))
    return abs(a.ber - b.ber) <= 3 * sigma, sigma


@pytest.fixture(scope="module")
def scl_6db():
    return ber_point(64, 960, 6.0, "scl", "optimal", 81)


def _ber_line(pt):
    return (f"BER {pt.ber:.2e} ({pt.bit_errors} bit errors, {pt.frame_errors} frame errors / {pt.frames} frames, "
            f"mu_pas {pt.mu_pas:g}, {pt.wall_seconds / 60:.1f} min)")


def test_criterion_8a_scl_ber(criterion, scl_6db):
    pt = scl_6db
    ok = pt.frames >= BER_FRAMES and pt.ber <= 1e-3 and pt.wall_seconds < 1800
    criterion("8a", ok, "SCL L=512 at 6.0 dB: " + _ber_line(pt))
    assert ok


def test_criterion_8b_bmd_gap(criterion, scl_6db):
    pt = ber_point(64, 960, 6.75, "topl-bmd", 16.0, 82)
    close, sigma = within_3_sigma(pt, scl_6db, 5 * 64)
    ok = close and pt.wall_seconds < 1800
    criterion("8b", ok, f"Top-L-BMD at 6.75 dB: {_ber_line(pt)}; SCL at 6.0 dB {scl_6db.ber:.2e}; "
              f"|diff| {abs(pt.ber - scl_6db.ber):.2e} vs 3 sigma {3 * sigma:.2e}")
    assert ok


def test_criterion_8c_bmd_ber(criterion):
    pt = ber_point(32, 992, 6.5, "topl-bmd", 16.0, 83)
    ok = pt.frames >= BER_FRAMES and pt.ber <= 1e-3 and pt.wall_seconds < 1800
    criterion("8c", ok, "Top-L-BMD L=512, K=32, M=992 at 6.5 dB: " + _ber_line(pt))
    assert ok


# --------------------------------------------------------------------------- 9
def test_criterion_9_determinism(criterion, tmp_path):
    t0 = time.perf_counter()
    outputs = {}
    for kind in ("scl", "topl-bmd"):
        base = {"code": {"kappa": 7, "J": 3, "K": 16, "crc_len": 8, "n_eps": 96},
                "channel": {"ebn0_db": [3.0, 5.0], "mu_pas": "optimal"},
                "pas": {"samples": 2000}, "construction": {"samples": 1000},
                "decoder": {"kind": kind, "L": 16},
                "trials": {"min_errors": 40, "max_frames": 400, "chunk": 20}, "seed": 2024}
        texts = []
        for run, workers in enumerate((1, 1, 8)):
            cfg = harness.ExperimentConfig.from_dict(dict(base, workers=workers, out=str(tmp_path / f"{kind}{run}.csv")))
            harness.write_ber(cfg, harness.run_ber_sweep(cfg))
            texts.append((tmp_path / f"{kind}{run}.csv").read_bytes())
        outputs[kind] = texts
    same = all(t[0] == t[1] == t[2] for t in outputs.values())
    dt = time.perf_counter() - t0
    criterion(9, same, f"CSV bytes identical across 2 runs and workers 1 vs 8 for SCL and Top-L-BMD: {same}, "
              f"{dt:.1f} s")
    assert same
