"""Plot-ready tables and the run manifest.

Files written by :func:`emit_outputs` into the output directory:

``runs/<label>_seed<seed>.csv``
    one row per scored slot, columns from :meth:`MetricsRecord.header`.
``summary.csv``
    ``label, scheme, seed, power_w, slots, mean_sum_se, mean_min_snr_db``;
    ``seed`` is ``all`` on the across-seed rows.
``outage.csv``
    ``label, scheme, seed, threshold_db, outage`` (``seed = all`` pools every slot).
``manifest.json``
    config, seeds, labels and the SHA-256 of every table above.
``timing.json``
    measured wall-times and the latency breakdown (not deterministic, so
    kept out of the tables and the manifest digests).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .. import __version__
from ..channel import outage_probability
from .config import SimConfig
from .scenario import MetricsRecord

SUMMARY_HEADER = ["label", "scheme", "seed", "power_w", "slots", "mean_sum_se", "mean_min_snr_db"]
OUTAGE_HEADER = ["label", "scheme", "seed", "threshold_db", "outage"]


def _db(x) -> float:
    return 10 * math.log10(x) if x > 0 else -math.inf


def _write(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_records(records, K: int, path):
    _write(Path(path), MetricsRecord.header(K), (r.row() for r in records))


def summary_rows(label, runs):
    rows = []
    for r in runs:
        ms = r.min_snrs
        rows.append([
            label, r.config.scheme, r.seed, repr(r.config.power_w), len(r.records),
            repr(r.mean_sum_se), repr(_db(float(np.mean(ms)))),
        ])
    if runs:
        se = float(np.mean([r.mean_sum_se for r in runs]))
        ms = np.concatenate([r.min_snrs for r in runs])
        c = runs[0].config
        rows.append([label, c.scheme, "all", repr(c.power_w), len(ms), repr(se), repr(_db(float(np.mean(ms))))])
    return rows


def outage_rows(label, runs, thresholds_db):
    th = np.asarray(thresholds_db, float)
    lin = 10 ** (th / 10)
    rows = []
    groups = [(r.seed, r.min_snrs) for r in runs]
    if runs:
        groups.append(("all", np.concatenate([r.min_snrs for r in runs])))
    for seed, ms in groups:
        for t, p in zip(th, outage_probability(ms, lin)):
            rows.append([label, runs[0].config.scheme, seed, repr(float(t)), repr(float(p))])
    return rows


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def emit_outputs(results: dict, cfg: SimConfig, out_dir) -> dict:
    """Write every table for ``results`` (label -> runs sorted by seed).

    Returns the manifest. Raises ``OSError`` when ``out_dir`` is not writable.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    summary, outage = [], []
    timing = {}
    for label in sorted(results):
        runs = results[label]
        for r in runs:
            p = out / "runs" / f"{label}_seed{r.seed}.csv"
            write_records(r.records, r.config.K, p)
            files.append(p)
            lat = r.latency()
            timing[f"{label}_seed{r.seed}"] = {
                "timing_s": r.timing,
                "latency": lat.as_dict(r.config.T),
            }
        summary += summary_rows(label, runs)
        outage += outage_rows(label, runs, cfg.outage_thresholds_db)
    _write(out / "summary.csv", SUMMARY_HEADER, summary)
    _write(out / "outage.csv", OUTAGE_HEADER, outage)
    files += [out / "summary.csv", out / "outage.csv"]
    manifest = {
        "package_version": __version__,
        "config": cfg.to_dict(),
        "seeds": sorted({r.seed for runs in results.values() for r in runs}),
        "labels": {
            label: runs[0].config.to_dict() if runs else None for label, runs in sorted(results.items())
        },
        "files": {str(p.relative_to(out)): _sha(p) for p in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    return manifest


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
