"""Command-line entry point: ``ccatrack {run,sweep,codebook,latency,config}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .beamtrack import select_in_layer
from .codebook import coverage_check, export_codebook, pattern_table
from .sim.config import SCHEMES, SimConfig, codebooks
from .sim.outputs import SUMMARY_HEADER, emit_outputs, summary_rows
from .sim.scenario import latency_estimate, run_many


def _config(args) -> SimConfig:
    cfg = SimConfig.load(args.config) if getattr(args, "config", None) else SimConfig()
    changes = {}
    for name in ("seed", "runs", "workers", "scheme"):
        v = getattr(args, name, None)
        if v is not None:
            changes[name] = v
    if getattr(args, "out", None):
        changes["out_dir"] = args.out
    return cfg.replace(**changes) if changes else cfg


def _schemes(args, cfg):
    return args.schemes or [cfg.scheme]


def _print_summary(results):
    for label, runs in sorted(results.items()):
        se = np.mean([r.mean_sum_se for r in runs])
        ms = np.concatenate([r.min_snrs for r in runs])
        med = np.median(ms)
        med_db = 10 * math.log10(med) if med > 0 else -math.inf
        print(f"{label:16s} runs={len(runs):3d}  mean sum SE={se:8.4f} bit/s/Hz  "
              f"median min-SNR={med_db:7.2f} dB")


def cmd_run(args):
    cfg = _config(args)
    seeds = range(cfg.seed, cfg.seed + cfg.runs)
    results = run_many(cfg, seeds, _schemes(args, cfg), workers=cfg.workers)
    emit_outputs(results, cfg, cfg.out_dir)
    _print_summary(results)
    print(f"wrote {cfg.out_dir}")


def _cast(cfg, name, text):
    fields = {f.name for f in dataclasses.fields(SimConfig)}
    if name not in fields:
        raise SystemExit(f"unknown config field {name!r}")
    current = getattr(cfg, name)
    if isinstance(current, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float) or current is None:
        return float(text)
    return text


def cmd_sweep(args):
    base = _config(args)
    seeds = range(base.seed, base.seed + base.runs)
    out = Path(base.out_dir)
    rows = []
    for text in args.values:
        value = _cast(base, args.param, text)
        cfg = base.replace(**{args.param: value})
        results = run_many(cfg, seeds, _schemes(args, cfg), workers=cfg.workers)
        sub = out / f"{args.param}={text}"
        emit_outputs(results, cfg, sub)
        print(f"{args.param}={text}")
        _print_summary(results)
        for label in sorted(results):
            rows += [[args.param, repr(value)] + r for r in summary_rows(label, results[label])]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "value"] + SUMMARY_HEADER)
        w.writerows(rows)
    print(f"wrote {out / 'sweep.csv'}")


def _layer_key(text):
    m, n = (int(x) for x in text.replace("x", ",").split(","))
    return m, n


def cmd_codebook(args):
    cfg = _config(args)
    cb = codebooks(cfg)[0 if args.side == "t" else 1]
    if args.action == "build":
        print(f"{args.side}-UAV codebook: {len(cb.layers)} layers, max layer {cb.max_key}")
        print(f"{'m_s':>4} {'n_s':>4} {'I':>4} {'J':>4} {'BW_a deg':>9} {'BW_e deg':>9}")
        for key, layer in sorted(cb.layers.items()):
            print(f"{key[0]:4d} {key[1]:4d} {layer.I:4d} {layer.J:4d} "
                  f"{math.degrees(layer.bw_a):9.3f} {math.degrees(layer.bw_e):9.3f}")
        if args.check:
            bad = [k for k, layer in cb.layers.items() if not coverage_check(layer, math.radians(1.0))[0]]
            print("coverage: all layers cover the sphere" if not bad else f"coverage gaps in {bad}")
    elif args.action == "inspect":
        key = _layer_key(args.layer) if args.layer else cb.max_key
        layer = cb.layers[key]
        print(repr(layer))
        if args.alpha is not None:
            res = select_in_layer(layer, math.radians(args.alpha), math.radians(args.beta))
            cw, s = res.codeword, res.support
            print(json.dumps({
                "indices": list(cw.indices),
                "beam_center_deg": [math.degrees(x) for x in cw.beam_center],
                "residual_deg": [math.degrees(x) for x in res.residual],
                "support": {"m_act": s.m_act, "n_act": s.n_act, "m_c": s.m_c, "n_c": s.n_c},
            }, indent=2))
    elif args.action == "export":
        layers = [_layer_key(x) for x in args.layers] if args.layers else None
        export_codebook(cb, args.path, layers, weights=not args.no_weights)
        print(f"wrote {args.path}")
    elif args.action == "pattern":
        key = _layer_key(args.layer) if args.layer else cb.max_key
        layer = cb.layers[key]
        beta = None if args.beta is None else math.radians(args.beta)
        deg, gains = pattern_table(layer, beta, args.step, cb.pattern)
        with open(args.path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha_deg"] + [f"i{i}" for i in range(1, layer.I + 1)])
            for a, row in zip(deg, gains):
                w.writerow([repr(float(a))] + [repr(float(g)) for g in row])
        print(f"wrote {args.path}")


def cmd_latency(args):
    cfg = _config(args)
    total_e, total_t, avg, lat = latency_estimate(cfg, args.rate, args.distance, args.local_e, args.local_t)
    for k, v in lat.as_dict(cfg.T).items():
        print(f"{k:10s} {v * 1e3:12.6f} ms")


def cmd_config(args):
    cfg = _config(args)
    if args.path:
        cfg.save(args.path)
        print(f"wrote {args.path}")
    else:
        print(cfg.to_json())


def build_parser():
    p = argparse.ArgumentParser(prog="ccatrack", description="CCA beam tracking for multi-UAV mmWave networks")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, runs=True):
        sp.add_argument("--config", help="JSON config whose keys mirror SimConfig fields")
        if runs:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--runs", type=int, help="number of seeds, starting at --seed")
            sp.add_argument("--out", help="output directory")
            sp.add_argument("--workers", type=int, help="parallel worker threads")
            sp.add_argument("--schemes", nargs="+", choices=SCHEMES, help="schemes to run on shared worlds")

    sp = sub.add_parser("run", help="simulate seeds and write CSV tables")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="repeat `run` over values of one config field")
    common(sp)
    sp.add_argument("--param", required=True)
    sp.add_argument("--values", nargs="+", required=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("codebook", help="build, inspect or export the multi-resolution codebook")
    common(sp, runs=False)
    sp.add_argument("action", choices=["build", "inspect", "export", "pattern"])
    sp.add_argument("--side", choices=["t", "r"], default="r")
    sp.add_argument("--layer", help="layer as m_s,n_s (default: max-resolution layer)")
    sp.add_argument("--layers", nargs="+", help="layers to export (default: all)")
    sp.add_argument("--alpha", type=float, help="azimuth in degrees for `inspect`")
    sp.add_argument("--beta", type=float, help="elevation in degrees")
    sp.add_argument("--step", type=float, default=1.0, help="pattern grid step in degrees")
    sp.add_argument("--path", default="codebook.json", help="output file for export/pattern")
    sp.add_argument("--no-weights", action="store_true")
    sp.add_argument("--check", action="store_true", help="run the 1-degree coverage check")
    sp.set_defaults(func=cmd_codebook)

    sp = sub.add_parser("latency", help="latency breakdown for a mean mmWave rate")
    common(sp, runs=False)
    sp.add_argument("--rate", type=float, required=True, help="mean mmWave rate in bit/s")
    sp.add_argument("--distance", type=float, default=100.0, help="max link distance in m")
    sp.add_argument("--local-e", type=float, default=0.0, help="e-slot processing time in s")
    sp.add_argument("--local-t", type=float, default=0.0, help="t-slot processing time in s")
    sp.set_defaults(func=cmd_latency)

    sp = sub.add_parser("config", help="print or save a config (defaults unless --config)")
    common(sp, runs=False)
    sp.add_argument("--path")
    sp.set_defaults(func=cmd_config)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "codebook" and args.action == "inspect" and (args.alpha is None) != (args.beta is None):
        raise SystemExit("--alpha and --beta go together")
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
