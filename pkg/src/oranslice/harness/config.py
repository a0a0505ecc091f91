"""Scenario configuration (JSON) and world construction.

Example document::

    {
      "seed": 1,
      "duration_ms": 120000,
      "bandwidth_hz": 3000000,
      "window_ms": 500,
      "channel": {"tx_power_dbm": 10.0},
      "mobility": {"radius_m": 200.0},
      "base_stations": [
        {"bs_id": 1, "position": [0, 0], "slices": [
          {"slice_id": 0, "slice_type": "EMBB", "n_ues": 3, "prb_quota": 5,
           "traffic": {"kind": "cbr", "rate_bps": 1000000}}, ...]}
      ],
      "quota_schedule": [[0, {"0": 9, "1": 3, "2": 3}], ...],
      "control": "static:rr"
    }

``control`` is one of ``static:rr``, ``static:wf``, ``static:pf`` or
``drl:<catalog dir>`` (the catalog's ``deployed.json`` picks the models).
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..exceptions import ConfigurationError
from ..ran.phy import prb_count
from ..ran.types import Cbr, ChannelParams, MobilityParams, Poisson, SchedulingPolicy, SliceType
from ..sim.engine import DEFAULT_WINDOW_MS, QuotaSchedule
from ..sim.world import SliceSpec, build_base_station

STATIC_MODES = ("static:rr", "static:wf", "static:pf")

# Transmit power of the desk scenario. At the macro default (43 dBm) every
# UE within 200 m sits at CQI 15 and the three schedulers coincide.
DESK_TX_POWER_DBM = 10.0


def parse_mode(mode):
    """``'static:wf'`` -> ``('static', SchedulingPolicy.WF)``; ``'drl:dir'`` -> ``('drl', 'dir')``."""
    kind, _, arg = str(mode).partition(":")
    kind = kind.strip().lower()
    if kind == "static":
        try:
            return "static", SchedulingPolicy.parse(arg)
        except ValueError as exc:
            raise ConfigurationError(f"bad control mode {mode!r}: {exc}") from None
    if kind == "drl":
        return "drl", arg or None
    raise ConfigurationError(f"unknown control mode {mode!r}")


def traffic_from_dict(d):
    d = dict(d)
    kind = d.pop("kind", "").lower()
    try:
        if kind == "cbr":
            return Cbr(**d)
        if kind == "poisson":
            return Poisson(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad traffic model {d}: {exc}") from None
    raise ConfigurationError(f"unknown traffic kind {kind!r}")


def traffic_to_dict(t):
    kind = "cbr" if isinstance(t, Cbr) else "poisson"
    return {"kind": kind, **dataclasses.asdict(t)}


def sweep_schedule(n_prbs, slice_ids, values=range(2, 12), block_ms=4000, order=None):
    """Quota schedule where each slice in turn takes each value in ``values``.

    The other slices split the remaining PRBs as evenly as possible (lower
    slice ids get the smaller share). ``order`` optionally permutes the
    (value, slice) blocks, e.g. for randomized training episodes.
    """
    slice_ids = list(slice_ids)
    blocks = [(v, s) for v in values for s in slice_ids]
    if order is not None:
        blocks = [blocks[i] for i in order]
    entries = []
    for k, (v, s) in enumerate(blocks):
        rest = [x for x in slice_ids if x != s]
        left = n_prbs - v
        if left < 0:
            raise ConfigurationError(f"sweep value {v} exceeds {n_prbs} PRBs")
        q = {s: v}
        for i, x in enumerate(rest):
            q[x] = left // len(rest) + (1 if i >= len(rest) - left % len(rest) else 0)
        entries.append((k * block_ms, q))
    return QuotaSchedule(entries)


@dataclass
class SliceSetup:
    slice_id: int
    slice_type: SliceType
    n_ues: int
    traffic: object
    prb_quota: int

    def to_dict(self):
        return {
            "slice_id": self.slice_id, "slice_type": SliceType(self.slice_type).name,
            "n_ues": self.n_ues, "prb_quota": self.prb_quota,
            "traffic": traffic_to_dict(self.traffic),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                slice_id=int(d["slice_id"]),
                slice_type=SliceType.parse(d["slice_type"]),
                n_ues=int(d["n_ues"]),
                traffic=traffic_from_dict(d["traffic"]),
                prb_quota=int(d["prb_quota"]),
            )
        except KeyError as exc:
            raise ConfigurationError(f"slice entry missing {exc}") from None


@dataclass
class BsSetup:
    bs_id: int
    position: tuple
    slices: list

    def to_dict(self):
        return {"bs_id": self.bs_id, "position": list(self.position),
                "slices": [s.to_dict() for s in self.slices]}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["bs_id"]), tuple(float(x) for x in d.get("position", (0.0, 0.0))),
                   [SliceSetup.from_dict(s) for s in d["slices"]])


@dataclass
class ScenarioConfig:
    seed: int = 1
    duration_ms: int = 120_000
    bandwidth_hz: float = 3e6
    window_ms: int = DEFAULT_WINDOW_MS
    base_stations: list = field(default_factory=list)
    quota_schedule: QuotaSchedule = field(default_factory=QuotaSchedule)
    channel: ChannelParams = field(default_factory=ChannelParams)
    mobility: MobilityParams = field(default_factory=MobilityParams)
    control: str = "static:rr"

    @property
    def n_prbs(self):
        return prb_count(self.bandwidth_hz)

    @property
    def n_windows(self):
        return self.duration_ms // self.window_ms

    def validate(self):
        if self.duration_ms <= 0:
            raise ConfigurationError("duration_ms must be > 0")
        if not self.base_stations:
            raise ConfigurationError("scenario has no base stations")
        ids = [b.bs_id for b in self.base_stations]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("duplicate bs_id")
        for b in self.base_stations:
            if sum(s.n_ues for s in b.slices) <= 0 or any(s.n_ues <= 0 for s in b.slices):
                raise ConfigurationError(f"BS {b.bs_id}: every slice needs at least one UE")
            self.quota_schedule.validate(self.n_prbs, [s.slice_id for s in b.slices])
        parse_mode(self.control)
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    # ------------------------------------------------------------ JSON

    def to_dict(self):
        return {
            "seed": self.seed,
            "duration_ms": self.duration_ms,
            "bandwidth_hz": self.bandwidth_hz,
            "window_ms": self.window_ms,
            "channel": dataclasses.asdict(self.channel),
            "mobility": dataclasses.asdict(self.mobility),
            "base_stations": [b.to_dict() for b in self.base_stations],
            "quota_schedule": [[t, {str(k): v for k, v in q.items()}]
                               for t, q in self.quota_schedule.to_list()],
            "control": self.control,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            sched = QuotaSchedule(
                [(int(t), {int(k): int(v) for k, v in q.items()}) for t, q in d.get("quota_schedule", [])]
            )
            cfg = cls(
                seed=int(d.get("seed", 1)),
                duration_ms=int(d.get("duration_ms", 120_000)),
                bandwidth_hz=float(d.get("bandwidth_hz", 3e6)),
                window_ms=int(d.get("window_ms", DEFAULT_WINDOW_MS)),
                base_stations=[BsSetup.from_dict(b) for b in d["base_stations"]],
                quota_schedule=sched,
                channel=ChannelParams(**d.get("channel", {})),
                mobility=MobilityParams(**d.get("mobility", {})),
                control=d.get("control", "static:rr"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bad scenario: {exc!r}") from None
        return cfg.validate()

    @classmethod
    def load(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not JSON ({exc})") from None

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))
        return path


def default_slices():
    return [
        SliceSetup(0, SliceType.EMBB, 3, Cbr(1e6), 5),
        SliceSetup(1, SliceType.URLLC, 3, Poisson(10.0), 5),
        SliceSetup(2, SliceType.MTC, 4, Poisson(30.0), 5),
    ]


def desk_scenario(seed=1, duration_ms=120_000, control="static:rr", paper_scale=False):
    """1 BS / 10 UEs / 3 MHz (or 4 BSs / 40 UEs with ``paper_scale``).

    Slice quotas follow :func:`sweep_schedule` in 4 s blocks.
    """
    if paper_scale:
        positions = [(0.0, 0.0), (500.0, 0.0), (0.0, 500.0), (500.0, 500.0)]
    else:
        positions = [(0.0, 0.0)]
    bss = [BsSetup(i + 1, p, default_slices()) for i, p in enumerate(positions)]
    return ScenarioConfig(
        seed=seed,
        duration_ms=duration_ms,
        bandwidth_hz=3e6,
        base_stations=bss,
        quota_schedule=sweep_schedule(15, [0, 1, 2]),
        channel=ChannelParams(tx_power_dbm=DESK_TX_POWER_DBM),
        control=control,
    ).validate()


def build_world(cfg: ScenarioConfig, seed=None, mobility=None):
    """Instantiate one :class:`BsState` per configured BS (UE ids globally unique)."""
    seed = cfg.seed if seed is None else seed
    world, next_ue = [], 0
    for b in cfg.base_stations:
        specs = [SliceSpec(s.slice_id, s.slice_type, s.n_ues, s.traffic, s.prb_quota) for s in b.slices]
        bs = build_base_station(
            b.bs_id, b.position, cfg.n_prbs, specs, first_ue_id=next_ue,
            channel=cfg.channel, mobility=mobility or cfg.mobility,
            quota_schedule=cfg.quota_schedule, seed=seed, window_ms=cfg.window_ms,
        )
        next_ue += sum(s.n_ues for s in b.slices)
        world.append(bs)
    return world
