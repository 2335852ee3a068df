"""Experiment runner: configuration, seeded Monte Carlo campaigns and CSV/JSON output.

Every random stream is derived from ``(seed, point, frame)`` (or a fixed tag
for the per-point construction and power search), and BER tallies are
consumed chunk by chunk in frame order, so the numbers written do not depend on
the worker count.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
import multiprocessing as mp
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .capacity import capacity_bi, capacity_mi, cfsp_entropy, gaussian_limit, optimize_pas
from .channel import PowerProfile, gmac_transmit, modulate, n0_for_bit_snr, n0_for_ebn0
from .construction import construct_index_set
from .decoders import BmdDecoder, SclDecoder
from .epcode import CodeParams, EpCodeSpec, encode_frame
from .selftest import EXAMPLE_A, run_selftest

log = logging.getLogger("epffma")

MODES = ("ber", "capacity", "pas-search", "construct", "selftest")
DECODERS = ("scl", "topl-bmd")

DEFAULTS = {
    "mode": "ber",
    "code": {"kappa": 10, "J": 5, "K": 64, "crc_len": 8, "crc_poly": None, "n_eps": 960},
    "channel": {"ebn0_db": [6.0], "snr_kind": "ebn0", "mu_pas": "optimal", "p_avg": 1.0},
    "construction": {"samples": 2000, "iterations": 2, "design_ebn0_db": None, "index_set": None},
    "decoder": {"kind": "scl", "L": 512, "metric": "l2"},
    "trials": {"min_frames": 0, "min_errors": 100, "max_frames": 5000, "chunk": 100},
    "capacity": {"J_list": [1, 2, 5, 15, 30, 50, 300], "ebn0_db": [float(x) for x in range(-10, 31, 2)]},
    "pas": {"J_list": [30], "snr_db": [5.0], "snr_kind": "bit", "grid": [float(x) for x in range(2, 39, 4)],
            "samples": 10000, "objective": "mc"},
    "selftest": {"A": list(EXAMPLE_A), "frames": 200},
    "seed": 0,
    "out": None,
    "workers": 1,
}

# keys that may differ between otherwise identical runs without changing results
_VOLATILE = ("workers", "out")


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        if not isinstance(cur.get(k), dict):
            raise ConfigError(f"unknown config section {k!r} in {dotted!r}")
        cur = cur[k]
    if keys[-1] not in cur:
        raise ConfigError(f"unknown config key {dotted!r}")
    cur[keys[-1]] = value


@dataclass
class ExperimentConfig:
    mode: str = "ber"
    code: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["code"]))
    channel: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["channel"]))
    construction: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["construction"]))
    decoder: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["decoder"]))
    trials: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["trials"]))
    capacity: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["capacity"]))
    pas: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["pas"]))
    selftest: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["selftest"]))
    seed: int = 0
    out: str | None = None
    workers: int = 1

    @classmethod
    def from_dict(cls, d: dict | None = None, overrides: dict | None = None) -> "ExperimentConfig":
        merged = _merge(DEFAULTS, d or {})
        for k in merged:
            if k not in DEFAULTS:
                raise ConfigError(f"unknown config key {k!r}")
        for dotted, v in (overrides or {}).items():
            set_path(merged, dotted, v)
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()), overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    def header(self) -> dict:
        """Resolved config without the keys that do not influence results."""
        d = self.to_dict()
        for k in _VOLATILE:
            d.pop(k, None)
        return d

    def code_params(self, J: int | None = None) -> CodeParams:
        c = dict(self.code)
        if J is not None:
            c["J"] = J
            if c.get("n_eps") is not None:
                c["n_eps"] = max(c["n_eps"], J * (c["K"] + c.get("crc_len", 0)))
        try:
            return CodeParams(**c)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid code parameters: {e}") from e

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        self.code_params()
        if not self.channel["ebn0_db"]:
            raise ConfigError("channel.ebn0_db grid is empty")
        if self.channel["snr_kind"] not in ("ebn0", "bit"):
            raise ConfigError("channel.snr_kind must be 'ebn0' or 'bit'")
        mu = self.channel["mu_pas"]
        if mu != "optimal" and not (isinstance(mu, (int, float)) and mu > 0):
            raise ConfigError("channel.mu_pas must be a positive number or 'optimal'")
        if self.decoder["kind"] not in DECODERS:
            raise ConfigError(f"decoder.kind must be one of {DECODERS}")
        L = self.decoder["L"]
        if not isinstance(L, int) or L < 1:
            raise ConfigError("decoder.L must be an integer >= 1")
        if self.decoder["kind"] == "scl" and L & (L - 1):
            raise ConfigError("SCL list size must be a power of two")
        if self.decoder["metric"] not in ("l2", "l1"):
            raise ConfigError("decoder.metric must be 'l2' or 'l1'")
        t = self.trials
        if t["max_frames"] < 1 or t["chunk"] < 1 or t["min_errors"] < 1:
            raise ConfigError("trials need max_frames, chunk and min_errors >= 1")
        if t["min_frames"] > t["max_frames"]:
            raise ConfigError("trials.min_frames exceeds trials.max_frames")
        if not self.capacity["J_list"] or not self.capacity["ebn0_db"]:
            raise ConfigError("capacity grids must be nonempty")
        if not self.pas["J_list"] or not self.pas["snr_db"] or not self.pas["grid"]:
            raise ConfigError("pas grids must be nonempty")


# ---------------------------------------------------------------------- output
def render_csv(cfg: ExperimentConfig, fields, rows) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(cfg.header(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in (r[f] for f in fields)])
    return buf.getvalue()


def read_csv(text: str) -> tuple[dict, list[dict]]:
    lines = text.splitlines()
    header = json.loads(lines[0][2:]) if lines and lines[0].startswith("# ") else {}
    body = [ln for ln in lines if not ln.startswith("#")]
    return header, list(csv.DictReader(body))


def emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------------- BER
@dataclass
class BerPoint:
    eb_n0_db: float
    frames: int
    bit_errors: int
    frame_errors: int
    ber: float
    fer: float
    ci_half_width: float
    mu_pas: float
    wall_seconds: float
    seed: int

    CSV_FIELDS = ("eb_n0_db", "frames", "bit_errors", "frame_errors", "ber", "fer",
                  "ci_half_width", "mu_pas", "seed")


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n) if n else math.inf


def n0_for(params: CodeParams, value_db: float, kind: str, p_avg: float = 1.0) -> float:
    return n0_for_ebn0(params, value_db, p_avg) if kind == "ebn0" else n0_for_bit_snr(params, value_db, p_avg)


def resolve_mu_pas(cfg: ExperimentConfig, params: CodeParams, n0: float, point: int) -> float:
    mu = cfg.channel["mu_pas"]
    if mu != "optimal":
        return float(mu)
    rng = np.random.default_rng([cfg.seed, point, 1])
    best, _ = optimize_pas(params, cfg.pas["grid"], n0, cfg.channel["p_avg"], cfg.pas["objective"],
                           cfg.pas["samples"], rng)
    return best


def build_spec(cfg: ExperimentConfig, params: CodeParams, p: PowerProfile, mu: float, point: int) -> EpCodeSpec:
    path = cfg.construction["index_set"]
    if path:
        d = json.loads(Path(path).read_text())
        spec = EpCodeSpec.from_dict(d.get("spec", d))
        if spec.params != params:
            raise ConfigError(f"index set in {path} was built for different code parameters")
        return spec
    design = cfg.construction["design_ebn0_db"]
    if design is not None:
        n0 = n0_for(params, design, cfg.channel["snr_kind"], p.p_avg)
        p = PowerProfile.from_pas(params, mu, p.p_avg, n0)
    rng = np.random.default_rng([cfg.seed, point, 2])
    A, _ = construct_index_set(params, p, cfg.construction["samples"], rng,
                               iterations=cfg.construction["iterations"])
    return EpCodeSpec.build(params, A)


_worker_cache: dict = {}


def _decoder_for(spec_dict: dict, dec: dict):
    key = (json.dumps(spec_dict, sort_keys=True), dec["kind"], dec["L"], dec["metric"])
    d = _worker_cache.get(key)
    if d is None:
        spec = EpCodeSpec.from_dict(spec_dict)
        d = SclDecoder(spec, dec["L"]) if dec["kind"] == "scl" else BmdDecoder(spec, dec["L"], dec["metric"])
        _worker_cache.clear()
        _worker_cache[key] = d
    return d


def simulate_frame(spec: EpCodeSpec, p: PowerProfile, decoder, rng: np.random.Generator) -> int:
    """One random frame end to end; returns the number of wrong information bits."""
    data = rng.integers(0, 2, size=(spec.J, spec.K), dtype=np.uint8)
    cs = encode_frame(spec, data)
    xs = np.stack([modulate(spec, cs[j], j + 1, p) for j in range(spec.J)])
    y, _ = gmac_transmit(xs, p, rng)
    res = decoder.decode(y, p)
    return int(np.count_nonzero(res.per_user_bits != data))


def simulate_chunk(task) -> tuple[int, int, int]:
    """(spec dict, power tuple, decoder cfg, seed, point, first frame, count) -> tallies."""
    spec_dict, ptuple, dec, seed, point, start, count = task
    decoder = _decoder_for(spec_dict, dec)
    p = PowerProfile(*ptuple)
    bit_err = frame_err = 0
    for f in range(start, start + count):
        e = simulate_frame(decoder.spec, p, decoder, np.random.default_rng([seed, point, f]))
        bit_err += e
        frame_err += e > 0
    return count, bit_err, frame_err


def _chunk_tasks(cfg, spec, p, point):
    t = cfg.trials
    start = 0
    base = (spec.to_dict(), (p.p_avg, p.n0, p.mu_inf, p.mu_red), dict(cfg.decoder), cfg.seed, point)
    while start < t["max_frames"]:
        n = min(t["chunk"], t["max_frames"] - start)
        yield base + (start, n)
        start += n


def _done(t, frames, frame_errors) -> bool:
    if frames >= t["max_frames"]:
        return True
    return frames >= t["min_frames"] and frame_errors >= t["min_errors"]


def _tally(cfg, tasks, pool):
    frames = bits = ferr = 0
    if pool is None:
        for task in tasks:
            n, b, f = simulate_chunk(task)
            frames, bits, ferr = frames + n, bits + b, ferr + f
            if _done(cfg.trials, frames, ferr):
                break
        return frames, bits, ferr
    window = 2 * int(cfg.workers)
    pending = []
    it = iter(tasks)
    for task in it:
        pending.append(pool.submit(simulate_chunk, task))
        if len(pending) >= window:
            break
    while pending:
        n, b, f = pending.pop(0).result()
        frames, bits, ferr = frames + n, bits + b, ferr + f
        if _done(cfg.trials, frames, ferr):
            break
        nxt = next(it, None)
        if nxt is not None:
            pending.append(pool.submit(simulate_chunk, nxt))
    for fut in pending:
        fut.cancel()
    return frames, bits, ferr


def run_ber_point(cfg: ExperimentConfig, point: int, value_db: float, pool=None, spec=None) -> BerPoint:
    t0 = time.perf_counter()
    params = cfg.code_params()
    kind = cfg.channel["snr_kind"]
    n0 = n0_for(params, value_db, kind, cfg.channel["p_avg"])
    mu = resolve_mu_pas(cfg, params, n0, point)
    p = PowerProfile.from_pas(params, mu, cfg.channel["p_avg"], n0)
    if spec is None:
        spec = build_spec(cfg, params, p, mu, point)
    frames, bits, ferr = _tally(cfg, _chunk_tasks(cfg, spec, p, point), pool)
    nbits = frames * params.J * params.K
    ber = bits / nbits if nbits else 0.0
    ebn0 = value_db if kind == "ebn0" else value_db - 10 * math.log10(2)
    return BerPoint(float(ebn0), frames, bits, ferr, ber, ferr / frames if frames else 0.0,
                    3 * binomial_sigma(ber, nbits), float(mu), time.perf_counter() - t0, cfg.seed)


def _pool(cfg):
    if int(cfg.workers) <= 1:
        return None
    return ProcessPoolExecutor(int(cfg.workers), mp_context=mp.get_context("spawn"))


def run_ber_sweep(cfg: ExperimentConfig, spec: EpCodeSpec | None = None) -> list[BerPoint]:
    pool = _pool(cfg)
    pts = []
    try:
        for i, v in enumerate(cfg.channel["ebn0_db"]):
            pt = run_ber_point(cfg, i, float(v), pool, spec)
            log.info("Eb/N0 %.2f dB: %d frames, BER %.3e, FER %.3e, mu_pas %g (%.1f s)",
                     pt.eb_n0_db, pt.frames, pt.ber, pt.fer, pt.mu_pas, pt.wall_seconds)
            pts.append(pt)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return pts


def ber_csv(cfg: ExperimentConfig, pts) -> str:
    return render_csv(cfg, BerPoint.CSV_FIELDS, [asdict(p) for p in pts])


def write_ber(cfg: ExperimentConfig, pts) -> None:
    emit(ber_csv(cfg, pts), cfg.out)
    if cfg.out:
        timing = {str(p.eb_n0_db): p.wall_seconds for p in pts}
        Path(str(cfg.out) + ".timing.json").write_text(json.dumps(timing, indent=2) + "\n")


# -------------------------------------------------------------------- capacity
CAPACITY_FIELDS = ("J", "eb_n0_db", "c_mi", "h_r", "gaussian_limit", "c_bi", "p_e")


def run_capacity(cfg: ExperimentConfig) -> list[dict]:
    """C_MI of the parity symbol channel per J, with Eb = P (one bit per user symbol)."""
    rows = []
    p_avg = cfg.channel["p_avg"]
    for J in cfg.capacity["J_list"]:
        h = cfsp_entropy(int(J))
        for x in cfg.capacity["ebn0_db"]:
            n0 = p_avg / 10 ** (float(x) / 10)
            p = PowerProfile(p_avg, n0, 1.0, 1.0)
            c_bi, pe = capacity_bi(int(J), p_avg / p.sigma2)
            rows.append({"J": int(J), "eb_n0_db": float(x), "c_mi": capacity_mi(int(J), 1.0, p), "h_r": h,
                         "gaussian_limit": gaussian_limit(int(J), 1.0, p), "c_bi": c_bi, "p_e": pe})
        log.info("capacity curve J=%d done", J)
    return rows


# ------------------------------------------------------------------ PAS search
PAS_FIELDS = ("J", "snr_db", "mu_pas", "objective", "is_best")


def run_pas_search(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    pc = cfg.pas
    for a, J in enumerate(pc["J_list"]):
        params = cfg.code_params(int(J))
        for b, s in enumerate(pc["snr_db"]):
            n0 = n0_for(params, float(s), pc["snr_kind"], cfg.channel["p_avg"])
            rng = np.random.default_rng([cfg.seed, a, b, 3])
            best, curve = optimize_pas(params, pc["grid"], n0, cfg.channel["p_avg"], pc["objective"],
                                       pc["samples"], rng)
            for g, val in curve:
                rows.append({"J": int(J), "snr_db": float(s), "mu_pas": g, "objective": float(val),
                             "is_best": int(g == best)})
            log.info("J=%d, %.2f dB: mu_pas* = %g", J, s, best)
    return rows


def best_mu(rows, J: int, snr_db: float) -> float:
    return next(r["mu_pas"] for r in rows if r["J"] == J and r["snr_db"] == snr_db and r["is_best"])


# ---------------------------------------------------------------- construction
def construct(cfg: ExperimentConfig) -> dict:
    params = cfg.code_params()
    x = float(cfg.channel["ebn0_db"][0])
    n0 = n0_for(params, x, cfg.channel["snr_kind"], cfg.channel["p_avg"])
    mu = resolve_mu_pas(cfg, params, n0, 0)
    p = PowerProfile.from_pas(params, mu, cfg.channel["p_avg"], n0)
    rng = np.random.default_rng([cfg.seed, 0, 2])
    A, profile = construct_index_set(params, p, cfg.construction["samples"], rng,
                                     iterations=cfg.construction["iterations"])
    spec = EpCodeSpec.build(params, A)
    return {"config": cfg.header(), "mu_pas": mu, "n0": n0, "spec": spec.to_dict(),
            "capacities": [float(c) for c in profile.capacities]}


# -------------------------------------------------------------------- selftest
def selftest(cfg: ExperimentConfig | None = None) -> tuple[bool, list]:
    st = (cfg or ExperimentConfig()).selftest
    results = run_selftest(tuple(st["A"]), st["frames"], (cfg.seed if cfg else 0))
    return all(ok for _, ok, _ in results), results
