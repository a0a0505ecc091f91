"""Post-processing: CDFs, action-selection tables and paired policy comparisons."""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from ..ran.types import SchedulingPolicy
from .config import ScenarioConfig, parse_mode
from .experiment import ExperimentSummary, run_experiment, spectral_efficiency

log = logging.getLogger(__name__)

# Published gains of learned scheduler selection over static policies, kept
# next to the measured deltas for qualitative comparison only.
REFERENCE_DELTAS = {
    "embb_se_gain_vs_best_static": "up to +20%",
    "urllc_buffer_reduction": {"static:rr": "-37%", "static:wf": "-5%", "static:pf": "-17%"},
}

__all__ = [
    "REFERENCE_DELTAS", "action_distribution", "compare_policies", "compute_cdf",
    "load_summaries", "mode_label", "report", "spectral_efficiency", "write_cdf",
]


def compute_cdf(samples):
    """Empirical CDF as ``[(value, fraction <= value), ...]`` over distinct values."""
    x = np.sort(np.asarray(list(samples), dtype=float))
    if x.size == 0:
        raise ValueError("compute_cdf needs at least one sample")
    vals, counts = np.unique(x, return_counts=True)
    frac = np.cumsum(counts) / x.size
    frac[-1] = 1.0
    return list(zip(vals.tolist(), frac.tolist()))


def action_distribution(summaries):
    """``{(slice_type, slice_prbs): (p_rr, p_wf, p_pf)}``, pooled over summaries.

    Cells never visited are omitted; each row sums to 1.
    """
    if isinstance(summaries, ExperimentSummary):
        summaries = [summaries]
    counts = {}
    for s in summaries:
        for key, row in s.action_counts.items():
            st, prbs = key.split("/")
            acc = counts.setdefault((st, int(prbs)), np.zeros(len(SchedulingPolicy)))
            acc += np.asarray(row, dtype=float)
    out = {}
    for cell, c in sorted(counts.items()):
        total = c.sum()
        if total > 0:
            out[cell] = tuple((c / total).tolist())
    return out


def mode_label(mode):
    kind, arg = parse_mode(mode)
    return f"static-{arg.name.lower()}" if kind == "static" else "drl"


def write_cdf(path, series):
    """``series``: {metric: samples}; one CSV with columns metric,value,cdf."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value", "cdf"])
        for metric, samples in series.items():
            if len(samples) == 0:
                continue
            for v, f in compute_cdf(samples):
                w.writerow([metric, f"{v:.9g}", f"{f:.6f}"])


def write_action_table(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slice_type", "slice_prbs"] + [f"p_{p.name}" for p in SchedulingPolicy])
        for (st, prbs), row in table.items():
            w.writerow([st, prbs] + [f"{p:.6f}" for p in row])


def _pooled(summaries, attr):
    out = {}
    for s in summaries:
        for st, samples in getattr(s, attr).items():
            out.setdefault(st, []).extend(samples)
    return out


def _stats(summaries):
    se = _pooled(summaries, "spectral_efficiency")
    buf = _pooled(summaries, "buffer_bytes")
    stats = {}
    for st in sorted(set(se) | set(buf)):
        stats[st] = {
            "se_median": float(np.median(se[st])) if se.get(st) else None,
            "se_mean": float(np.mean(se[st])) if se.get(st) else None,
            "buffer_median": float(np.median(buf[st])) if buf.get(st) else None,
            "buffer_mean": float(np.mean(buf[st])) if buf.get(st) else None,
            "n_se": len(se.get(st, [])),
            "n_buffer": len(buf.get(st, [])),
        }
    return stats


def _delta(x, ref):
    return None if x is None or not ref else (x - ref) / ref


def _comparison(by_mode):
    """Per-mode stats plus, if a drl mode is present, deltas vs the best static mode."""
    table = {mode: _stats(sums) for mode, sums in by_mode.items()}
    doc = {"modes": table}
    drl = [m for m in table if parse_mode(m)[0] == "drl"]
    static = [m for m in table if parse_mode(m)[0] == "static"]
    if drl and static:
        d = table[drl[0]]
        deltas = {}
        for st in d:
            per = {}
            se = {m: table[m][st]["se_median"] for m in static if table[m].get(st)}
            se = {m: v for m, v in se.items() if v is not None}
            if se and d[st]["se_median"] is not None:
                best = max(se, key=se.get)
                per["se_median_best_static"] = best
                per["se_median_delta"] = _delta(d[st]["se_median"], se[best])
            buf = {m: table[m][st]["buffer_mean"] for m in static if table[m].get(st)}
            if buf:
                best = min(buf, key=buf.get)
                per["buffer_mean_best_static"] = best
                per["buffer_mean_delta"] = _delta(d[st]["buffer_mean"], buf[best])
                per["buffer_mean_delta_vs"] = {m: _delta(d[st]["buffer_mean"], v) for m, v in buf.items()}
            deltas[st] = per
        doc["drl_mode"] = drl[0]
        doc["deltas"] = deltas
        doc["reference_deltas"] = REFERENCE_DELTAS
    return doc


def compare_policies(cfg: ScenarioConfig, modes, seeds, out_dir, deterministic=True):
    """Run every mode on every seed (paired) and write a comparison report.

    Layout: ``<out>/<mode>/seed<k>/{dataset.csv,summary.json}``,
    ``<out>/cdf/<mode>_<slice>.csv`` and ``<out>/comparison.json``.
    """
    if len(modes) < 2:
        raise ValueError("compare_policies needs at least two modes")
    out = Path(out_dir)
    by_mode = {}
    for mode in modes:
        sums = []
        for seed in seeds:
            d = out / mode_label(mode) / f"seed{seed}"
            sums.append(run_experiment(cfg, d, mode=mode, seed=seed, deterministic=deterministic))
            log.info("%s seed %d done", mode, seed)
        by_mode[mode] = sums
    doc = _comparison(by_mode)
    doc["seeds"] = list(seeds)
    _write_report_files(out, by_mode)
    (out / "comparison.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    return doc


def _write_report_files(out, by_mode):
    cdf_dir = out / "cdf"
    cdf_dir.mkdir(parents=True, exist_ok=True)
    for mode, sums in by_mode.items():
        se = _pooled(sums, "spectral_efficiency")
        buf = _pooled(sums, "buffer_bytes")
        for st in sorted(set(se) | set(buf)):
            write_cdf(cdf_dir / f"{mode_label(mode)}_{st}.csv",
                      {"spectral_efficiency": se.get(st, []), "buffer_bytes": buf.get(st, [])})
        table = action_distribution(sums)
        write_action_table(out / f"action_distribution_{mode_label(mode)}.csv", table)


def load_summaries(in_dir):
    """All ``summary.json`` files below ``in_dir``, grouped by mode."""
    by_mode = {}
    for p in sorted(Path(in_dir).rglob("summary.json")):
        s = ExperimentSummary.load(p)
        by_mode.setdefault(s.mode, []).append(s)
    return by_mode


def report(in_dir):
    """Rebuild CDF/table CSVs (and comparison.json) from a run or compare directory."""
    in_dir = Path(in_dir)
    by_mode = load_summaries(in_dir)
    if not by_mode:
        raise FileNotFoundError(f"no summary.json under {in_dir}")
    _write_report_files(in_dir, by_mode)
    doc = _comparison(by_mode)
    with open(in_dir / "table.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "slice_type", "se_median", "se_mean", "buffer_median", "buffer_mean"])
        for mode, stats in doc["modes"].items():
            for st, s in stats.items():
                w.writerow([mode, st] + [
                    "" if s[k] is None else f"{s[k]:.6g}"
                    for k in ("se_median", "se_mean", "buffer_median", "buffer_mean")
                ])
    if len(by_mode) >= 2:
        (in_dir / "comparison.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    return doc
