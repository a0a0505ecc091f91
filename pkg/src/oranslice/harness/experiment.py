"""One simulation run: dataset CSV + summary JSON.

Dataset columns (one row per UE per KPI window, time-sorted)::

    timestamp_ms, bs_id, slice_id, slice_type, ue_id, dl_buffer_bytes,
    tx_bytes, tx_pkts, dl_thr_bps, dl_cqi, dl_mcs, sinr_db, granted_prbs,
    slice_prbs, sched_policy, reward

``summary.json`` is a deterministic function of (config, mode, seed);
wall-clock figures go to ``timing.json``.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..drl.catalog import ModelCatalog
from ..drl.reward import compute_reward
from ..exceptions import ConfigurationError
from ..ran.types import SliceType
from ..ric.ric import NearRtRic
from ..ric.server import RicServer
from ..ric.xapp import XAppDescriptor
from ..sim.e2node import RicControl
from ..sim.engine import StaticControl, run
from .config import ScenarioConfig, build_world, parse_mode

log = logging.getLogger(__name__)

DATASET_COLUMNS = (
    "timestamp_ms", "bs_id", "slice_id", "slice_type", "ue_id", "dl_buffer_bytes",
    "tx_bytes", "tx_pkts", "dl_thr_bps", "dl_cqi", "dl_mcs", "sinr_db", "granted_prbs",
    "slice_prbs", "sched_policy", "reward",
)
PRB_BANDWIDTH_HZ = 180_000


def spectral_efficiency(report):
    """Slice downlink spectral efficiency in bit/s/Hz; ``None`` if it holds no PRBs."""
    if report.slice_prbs <= 0:
        return None
    return report.total_thr_bps() / (report.slice_prbs * PRB_BANDWIDTH_HZ)


def dataset_rows(report):
    reward = compute_reward(report.slice_type, report)
    for r in report.records:
        yield (
            report.timestamp_ms, report.bs_id, report.slice_id, report.slice_type.name, r.ue_id,
            r.dl_buffer_bytes, r.tx_bytes, r.tx_pkts, r.dl_thr_bps, r.dl_cqi, r.dl_mcs,
            f"{r.sinr_cdb / 100:.2f}", r.granted_prbs, report.slice_prbs,
            report.policy.name, f"{reward:.6f}",
        )


@dataclass
class ExperimentSummary:
    mode: str
    seed: int
    n_windows: int = 0
    spectral_efficiency: dict = field(default_factory=dict)  # slice type -> samples
    buffer_bytes: dict = field(default_factory=dict)  # slice type -> samples (slice total)
    action_counts: dict = field(default_factory=dict)  # "TYPE/prbs" -> [rr, wf, pf]
    controls: int = 0
    warnings: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)

    def add_report(self, rep):
        st = rep.slice_type.name
        se = spectral_efficiency(rep)
        if se is not None:
            self.spectral_efficiency.setdefault(st, []).append(round(se, 9))
        self.buffer_bytes.setdefault(st, []).append(rep.total_buffer_bytes())

    def count_action(self, slice_type, slice_prbs, policy):
        key = f"{SliceType(slice_type).name}/{int(slice_prbs)}"
        row = self.action_counts.setdefault(key, [0, 0, 0])
        row[int(policy)] += 1

    def to_dict(self):
        return {
            "mode": self.mode, "seed": self.seed, "n_windows": self.n_windows,
            "spectral_efficiency": self.spectral_efficiency,
            "buffer_bytes": self.buffer_bytes,
            "action_counts": dict(sorted(self.action_counts.items(), key=lambda kv: _cell_key(kv[0]))),
            "controls": self.controls, "warnings": self.warnings, "counters": self.counters,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _cell_key(key):
    st, prbs = key.split("/")
    return SliceType[st].value, int(prbs)


def _drl_ric(catalog_dir, inline):
    if catalog_dir is None:
        raise ConfigurationError("drl mode needs a catalog directory (drl:<dir>)")
    catalog = ModelCatalog(catalog_dir)
    ric = NearRtRic(catalog, inline=inline)
    for st, entry_id in sorted(catalog.deployed().items()):
        ric.register_xapp(XAppDescriptor(f"{st.name.lower()}-xapp", st, entry_id))
    return ric


def run_experiment(cfg: ScenarioConfig, out_dir=None, mode=None, seed=None,
                   deterministic=True, ric_address=None, catalog=None):
    """Run one scenario in one control mode and return its summary.

    In drl mode the RIC is booted in-process (loopback link when
    ``deterministic``, TCP on an ephemeral port otherwise) unless
    ``ric_address=(host, port)`` points at an external one. An unreachable
    RIC fails before the first TTI.
    """
    mode = mode or cfg.control
    seed = cfg.seed if seed is None else seed
    kind, arg = parse_mode(mode)
    world = build_world(cfg, seed=seed)
    summary = ExperimentSummary(mode=mode, seed=seed, n_windows=cfg.n_windows)
    ric = server = None
    if kind == "static":
        source = StaticControl(arg)
    elif ric_address is not None:
        source = RicControl.tcp(*ric_address, period_ms=cfg.window_ms)
    else:
        ric = _drl_ric(arg or catalog, inline=deterministic)
        if deterministic:
            source = RicControl.loopback(ric, period_ms=cfg.window_ms)
        else:
            server = RicServer(ric, port=0).start()
            source = RicControl.tcp("127.0.0.1", server.port, period_ms=cfg.window_ms)

    out = Path(out_dir) if out_dir is not None else None
    fh = writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        fh = open(out / "dataset.csv", "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_COLUMNS)

    def on_window(reports):
        reports = sorted(reports, key=lambda r: (r.timestamp_ms, r.bs_id, r.slice_id))
        for rep in reports:
            summary.add_report(rep)
            if kind == "static":
                summary.count_action(rep.slice_type, rep.slice_prbs, rep.policy)
            if writer is not None:
                writer.writerows(dataset_rows(rep))

    t0 = time.perf_counter()
    try:
        trace = run(world, cfg.duration_ms, source, on_window=on_window)
    finally:
        if fh is not None:
            fh.close()
        source.close()
        if server is not None:
            ric.wait_idle()
            server.stop()
    wall = time.perf_counter() - t0

    if ric is not None:
        for (_, _, _, st, prbs, _, chosen) in ric.decisions:
            summary.count_action(st, prbs, chosen)
        summary.counters = dict(sorted(ric.counters.items()))
    elif kind == "drl":
        # external RIC: the policy each window ran under is what we can see
        for rep in trace.reports:
            summary.count_action(rep.slice_type, rep.slice_prbs, rep.policy)
    summary.controls = len(trace.controls)
    summary.warnings = list(trace.warnings)
    if out is not None:
        summary.save(out / "summary.json")
        (out / "timing.json").write_text(json.dumps({
            "wall_s": wall,
            "sim_s": cfg.duration_ms / 1000,
            "speedup": cfg.duration_ms / 1000 / wall if wall > 0 else None,
        }, indent=1))
        cfg.replace(control=mode, seed=seed).save(out / "scenario.json")
    summary.trace = trace
    return summary


__all__ = [
    "DATASET_COLUMNS", "ExperimentSummary", "PRB_BANDWIDTH_HZ",
    "dataset_rows", "run_experiment", "spectral_efficiency",
]
