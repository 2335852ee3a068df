"""Command-line front end.

    epffma ber --config run.json --seed 7 --out ber.csv --workers 8 --decoder.L 256

Any ``--section.key value`` pair overrides the matching config entry; values
are parsed as JSON when possible (``--channel.ebn0_db [5,6]``), else kept as
strings.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .selftest import format_report


def _parse_overrides(extra: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        key = extra[i]
        if not key.startswith("--") or "." not in key:
            raise harness.ConfigError(f"unrecognized argument {key!r}")
        if i + 1 >= len(extra):
            raise harness.ConfigError(f"missing value for {key}")
        raw = extra[i + 1]
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        out[key[2:]] = val
        i += 2
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epffma", description="Polarized EP codes for PA-FFMA over a Gaussian MAC")
    sub = ap.add_subparsers(dest="mode", required=True)
    for name, help_ in (("ber", "BER/FER sweep over Eb/N0"),
                        ("capacity", "C_MI curves and CFSP entropy per user count"),
                        ("pas-search", "grid search of the power split mu_pas"),
                        ("construct", "Monte Carlo index-set construction"),
                        ("selftest", "reproduce the worked examples")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--workers", type=int)
        p.add_argument("-q", "--quiet", action="store_true", help="no progress on standard error")
    return ap


def resolve_config(args, extra: list[str]) -> harness.ExperimentConfig:
    base = json.loads(open(args.config).read()) if args.config else {}
    base["mode"] = args.mode
    for k in ("seed", "out", "workers"):
        v = getattr(args, k)
        if v is not None:
            base[k] = v
    return harness.ExperimentConfig.from_dict(base, _parse_overrides(extra))


def main(argv=None) -> int:
    args, extra = build_parser().parse_known_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args, extra)
    except (harness.ConfigError, OSError, json.JSONDecodeError) as e:
        print(f"epffma: {e}", file=sys.stderr)
        return 2

    if cfg.mode == "ber":
        harness.write_ber(cfg, harness.run_ber_sweep(cfg))
    elif cfg.mode == "capacity":
        harness.emit(harness.render_csv(cfg, harness.CAPACITY_FIELDS, harness.run_capacity(cfg)), cfg.out)
    elif cfg.mode == "pas-search":
        harness.emit(harness.render_csv(cfg, harness.PAS_FIELDS, harness.run_pas_search(cfg)), cfg.out)
    elif cfg.mode == "construct":
        harness.emit(json.dumps(harness.construct(cfg), indent=1) + "\n", cfg.out)
    else:
        ok, results = harness.selftest(cfg)
        report = format_report(results) + "\n"
        harness.emit(report, cfg.out)
        return 0 if ok else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
