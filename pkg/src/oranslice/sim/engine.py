"""1 ms TTI engine for sliced base stations.

A :class:`BsState` owns its UEs, traffic sources, RNG streams and KPI
accumulators, and is advanced in place by :func:`run_tti`. Everything is a
deterministic function of the construction arguments and the seed.
"""
from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field

import numpy as np

from ..e2lite.codec import (
    MAX_REPORT_PERIOD_MS,
    MIN_REPORT_PERIOD_MS,
    ControlAck,
    ControlPayload,
    IndicationPayload,
    MsgType,
    UeRecord,
    encode_frame,
    encode_control,
    encode_control_ack,
    encode_indication,
)
from ..exceptions import ConfigurationError
from ..ran.phy import (
    BYTES_PER_PRB,
    CQI_EFFICIENCY,
    CQI_TO_MCS,
    init_ue_position,
    step_mobility_channel,
)
from ..ran.scheduling import schedule_pf, schedule_rr, schedule_wf
from ..ran.traffic import TrafficSource
from ..ran.types import (
    EWMA_FLOOR_BPS,
    ChannelParams,
    MobilityParams,
    SchedulingPolicy,
    SliceConfig,
    SliceType,
)

log = logging.getLogger(__name__)

TTI_MS = 1
CHANNEL_STEP_TTIS = 10
TRAFFIC_BLOCK_TTIS = 500
DEFAULT_WINDOW_MS = 500
PF_ALPHA = 0.1

_U16 = 0xFFFF
_U32 = 0xFFFFFFFF


def _sat(v, hi):
    return hi if v > hi else (0 if v < 0 else int(v))


class QuotaSchedule:
    """Time-sorted ``(t_start_ms, {slice_id: prbs})`` entries."""

    def __init__(self, entries=()):
        norm = []
        for t, quotas in entries:
            norm.append((int(t), {int(k): int(v) for k, v in dict(quotas).items()}))
        if any(norm[i][0] >= norm[i + 1][0] for i in range(len(norm) - 1)):
            raise ConfigurationError("quota schedule entries must be strictly time-sorted")
        self.entries = norm
        self._starts = [t for t, _ in norm]

    def __len__(self):
        return len(self.entries)

    def validate(self, n_prbs, slice_ids=None):
        for t, quotas in self.entries:
            if any(v < 0 for v in quotas.values()):
                raise ConfigurationError(f"negative quota in schedule entry at {t} ms")
            if sum(quotas.values()) > n_prbs:
                raise ConfigurationError(
                    f"schedule entry at {t} ms allocates {sum(quotas.values())} > {n_prbs} PRBs"
                )
            if slice_ids is not None and not set(quotas) <= set(slice_ids):
                raise ConfigurationError(f"schedule entry at {t} ms names unknown slices")
        return self

    def quotas_at(self, t_ms):
        """Quotas in force at ``t_ms`` or ``None`` before the first entry."""
        i = bisect.bisect_right(self._starts, t_ms) - 1
        return self.entries[i][1] if i >= 0 else None

    def to_list(self):
        return [[t, {str(k): v for k, v in q.items()}] for t, q in self.entries]


@dataclass(frozen=True)
class KpiReport:
    bs_id: int
    slice_id: int
    slice_type: SliceType
    window_start_ms: int
    window_len_ms: int
    policy: SchedulingPolicy
    slice_prbs: int
    records: tuple = ()

    @property
    def timestamp_ms(self):
        return self.window_start_ms + self.window_len_ms

    @property
    def num_ues(self):
        return len(self.records)

    def total_thr_bps(self):
        return sum(r.dl_thr_bps for r in self.records)

    def total_buffer_bytes(self):
        return sum(r.dl_buffer_bytes for r in self.records)

    def to_indication(self, subscription_id=0):
        return IndicationPayload(
            subscription_id=subscription_id,
            bs_id=self.bs_id,
            slice_id=self.slice_id,
            timestamp_ms=self.timestamp_ms,
            sched_policy=int(self.policy),
            slice_prbs=self.slice_prbs,
            records=self.records,
        )

    @classmethod
    def from_indication(cls, ind: IndicationPayload, slice_type, window_len_ms):
        return cls(
            bs_id=ind.bs_id,
            slice_id=ind.slice_id,
            slice_type=SliceType.parse(slice_type),
            window_start_ms=ind.timestamp_ms - window_len_ms,
            window_len_ms=window_len_ms,
            policy=SchedulingPolicy(ind.sched_policy),
            slice_prbs=ind.slice_prbs,
            records=tuple(ind.records),
        )


class KpiWindowAccumulator:
    """Per-UE sums over the current report window."""

    __slots__ = ("served", "pkts", "granted", "requested", "start_ms")

    def __init__(self, n_ues, start_ms=0):
        self.reset(n_ues, start_ms)

    def reset(self, n_ues, start_ms):
        self.served = [0] * n_ues
        self.pkts = [0] * n_ues
        self.granted = [0] * n_ues
        self.requested = [0] * n_ues
        self.start_ms = start_ms


@dataclass
class _SliceRuntime:
    cfg: SliceConfig
    idx: list  # indices into BsState.ues, ascending ue_id
    period_ms: int = DEFAULT_WINDOW_MS
    acc: KpiWindowAccumulator = None
    rr_pointer: int | None = None


class BsState:
    """One base station: slices, UEs, channel/traffic state, accumulators."""

    def __init__(
        self,
        bs_id,
        position,
        n_prbs,
        slices,
        ues,
        traffic,
        *,
        channel=None,
        mobility=None,
        quota_schedule=None,
        seed=0,
        window_ms=DEFAULT_WINDOW_MS,
    ):
        self.bs_id = int(bs_id)
        self.position = np.asarray(position, dtype=float)
        self.n_prbs = int(n_prbs)
        self.channel = channel or ChannelParams()
        self.mobility = mobility or MobilityParams()
        self.quota_schedule = quota_schedule or QuotaSchedule()
        self.clock_ms = 0
        self.slices = list(slices)
        ues = sorted(ues, key=lambda u: u.ue_id)
        self._check(ues)
        self.quota_schedule.validate(self.n_prbs, [s.slice_id for s in self.slices])

        ss = np.random.SeedSequence([int(seed), self.bs_id])
        self.traffic_rng, self.channel_rng = (np.random.default_rng(s) for s in ss.spawn(2))

        self.ues = [
            init_ue_position(u, self.position, self.mobility, self.channel_rng, self.channel)
            for u in ues
        ]
        pos = {u.ue_id: i for i, u in enumerate(self.ues)}
        self.sources = [TrafficSource(traffic[u.ue_id]) for u in self.ues]
        self._pkt_size = [s.model.pkt_size_bytes for s in self.sources]
        self._arrivals = [[0] * TRAFFIC_BLOCK_TTIS for _ in self.ues]
        self._cum_served = [0] * len(self.ues)
        self._cum_arrived = [0] * len(self.ues)
        self._last_pkts = [0] * len(self.ues)
        self._rt = {}
        for s in self.slices:
            idx = sorted(pos[u] for u in s.ue_ids)
            rt = _SliceRuntime(cfg=s, idx=idx, period_ms=int(window_ms))
            rt.acc = KpiWindowAccumulator(len(idx), 0)
            self._rt[s.slice_id] = rt
        self.set_report_period(window_ms)
        self._next_quota_entry = 0

    def _check(self, ues):
        ids = [u.ue_id for u in ues]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"BS {self.bs_id}: duplicate ue_id")
        assigned = [u for s in self.slices for u in s.ue_ids]
        if sorted(assigned) != sorted(ids):
            raise ConfigurationError(
                f"BS {self.bs_id}: slices must partition the UEs (each UE in exactly one slice)"
            )
        if len({s.slice_id for s in self.slices}) != len(self.slices):
            raise ConfigurationError(f"BS {self.bs_id}: duplicate slice_id")
        if sum(s.prb_quota for s in self.slices) > self.n_prbs:
            raise ConfigurationError(f"BS {self.bs_id}: slice quotas exceed {self.n_prbs} PRBs")

    # ------------------------------------------------------------------ accessors

    def slice(self, slice_id):
        return self._rt[slice_id].cfg

    @property
    def rr_pointers(self):
        return {sid: rt.rr_pointer for sid, rt in self._rt.items()}

    def ue(self, ue_id):
        for u in self.ues:
            if u.ue_id == ue_id:
                return u
        raise KeyError(ue_id)

    def set_report_period(self, period_ms, slice_id=None):
        if not MIN_REPORT_PERIOD_MS <= period_ms <= MAX_REPORT_PERIOD_MS:
            raise ConfigurationError(f"report window {period_ms} ms outside [10, 1000] ms")
        targets = [self._rt[slice_id]] if slice_id is not None else self._rt.values()
        for rt in targets:
            rt.period_ms = int(period_ms)

    def bytes_arrived(self, ue_id):
        return self._cum_arrived[self._index(ue_id)]

    def bytes_served(self, ue_id):
        return self._cum_served[self._index(ue_id)]

    def _index(self, ue_id):
        for i, u in enumerate(self.ues):
            if u.ue_id == ue_id:
                return i
        raise KeyError(ue_id)

    # ------------------------------------------------------------------ control

    def apply_control(self, slice_id, policy):
        """Set a slice's scheduler; effective from the next TTI.

        Returns ``True`` if applied, ``False`` (negative ack) for an unknown
        slice. The RR pointer survives policy switches.
        """
        rt = self._rt.get(slice_id)
        if rt is None:
            return False
        rt.cfg.policy = SchedulingPolicy.parse(policy)
        return True

    def apply_quota_schedule(self, schedule=None, t_ms=None):
        schedule = schedule or self.quota_schedule
        t = self.clock_ms if t_ms is None else t_ms
        quotas = schedule.quotas_at(t)
        if quotas is not None:
            for sid, q in quotas.items():
                self._rt[sid].cfg.prb_quota = q
        return self

    # ------------------------------------------------------------------ TTI

    def run_tti(self):
        """Advance one 1 ms TTI. Returns reports for windows that closed."""
        t = self.clock_ms
        sched = self.quota_schedule
        if self._next_quota_entry < len(sched) and sched.entries[self._next_quota_entry][0] <= t:
            while (self._next_quota_entry + 1 < len(sched)
                   and sched.entries[self._next_quota_entry + 1][0] <= t):
                self._next_quota_entry += 1
            for sid, q in sched.entries[self._next_quota_entry][1].items():
                self._rt[sid].cfg.prb_quota = q
            self._next_quota_entry += 1

        ues = self.ues
        k = t % TRAFFIC_BLOCK_TTIS
        if k == 0:
            rng = self.traffic_rng
            self._arrivals = [
                src.packet_counts(TRAFFIC_BLOCK_TTIS, 1e-3, rng).tolist() for src in self.sources
            ]
        arrivals = self._arrivals
        cum_arr = self._cum_arrived
        sizes = self._pkt_size
        for i in range(len(ues)):
            c = arrivals[i][k]
            if c:
                b = c * sizes[i]
                ues[i].dl_buffer_bytes += b
                cum_arr[i] += b

        if t % CHANNEL_STEP_TTIS == 0 and t > 0:
            dt = CHANNEL_STEP_TTIS * 1e-3
            for i, u in enumerate(ues):
                ues[i] = step_mobility_channel(
                    u, self.position, dt, self.channel, self.channel_rng, self.mobility
                )

        cum_served = self._cum_served
        for rt in self._rt.values():
            cfg = rt.cfg
            acc = rt.acc
            idx = rt.idx
            q = cfg.prb_quota
            back = []
            for j, i in enumerate(idx):
                u = ues[i]
                if u.dl_buffer_bytes > 0 and u.cqi > 0:
                    back.append((j, u))
                    need = -(-u.dl_buffer_bytes // BYTES_PER_PRB[u.cqi])
                    acc.requested[j] += need if need < q else q
            grants = None
            if back and q > 0:
                ids = [u.ue_id for _, u in back]
                pol = cfg.policy
                if pol == SchedulingPolicy.RR:
                    grants, rt.rr_pointer = schedule_rr(ids, q, rt.rr_pointer)
                elif pol == SchedulingPolicy.PF:
                    grants = schedule_pf(
                        ids, q, [BYTES_PER_PRB[u.cqi] * 8000 for _, u in back],
                        [u.ewma_thr_bps for _, u in back],
                    )
                else:
                    grants = schedule_wf(ids, q, [CQI_EFFICIENCY[u.cqi] for _, u in back])
            served_now = {}
            if grants:
                for j, u in back:
                    g = grants.get(u.ue_id)
                    if not g:
                        continue
                    cap = g * BYTES_PER_PRB[u.cqi]
                    s = cap if cap < u.dl_buffer_bytes else u.dl_buffer_bytes
                    u.dl_buffer_bytes -= s
                    acc.granted[j] += g
                    acc.served[j] += s
                    served_now[j] = s
                    cum_served[idx[j]] += s
            # PF history: every slice UE, served rate or 0
            for j, i in enumerate(idx):
                u = ues[i]
                s = served_now.get(j, 0)
                r = (1.0 - PF_ALPHA) * u.ewma_thr_bps + PF_ALPHA * s * 8000.0
                u.ewma_thr_bps = r if r > EWMA_FLOOR_BPS else EWMA_FLOOR_BPS

        self.clock_ms = t + TTI_MS
        reports = None
        for sid, rt in self._rt.items():
            if self.clock_ms - rt.acc.start_ms >= rt.period_ms:
                if reports is None:
                    reports = []
                reports.append(self.close_kpi_window(sid))
        return reports

    def close_kpi_window(self, slice_id):
        """Emit the slice's KPI report for the window ending now and reset it."""
        rt = self._rt[slice_id]
        acc = rt.acc
        win = self.clock_ms - acc.start_ms
        win_s = win / 1000.0 if win > 0 else 1.0
        records = []
        for j, i in enumerate(rt.idx):
            u = self.ues[i]
            pkts_total = self._cum_served[i] // self._pkt_size[i]
            pkts = pkts_total - self._last_pkts[i]
            self._last_pkts[i] = pkts_total
            records.append(
                UeRecord(
                    ue_id=u.ue_id,
                    dl_buffer_bytes=_sat(u.dl_buffer_bytes, _U32),
                    tx_bytes=_sat(acc.served[j], _U32),
                    tx_pkts=_sat(pkts, _U32),
                    dl_thr_bps=_sat(round(acc.served[j] * 8 / win_s), _U32),
                    ul_thr_bps=0,
                    sinr_cdb=max(-32768, min(32767, int(round(u.sinr_db * 100)))),
                    granted_prbs=_sat(acc.granted[j], _U16),
                    requested_prbs=_sat(acc.requested[j], _U16),
                    bler_permille=0,
                    dl_cqi=u.cqi,
                    dl_mcs=CQI_TO_MCS[u.cqi],
                )
            )
        report = KpiReport(
            bs_id=self.bs_id,
            slice_id=slice_id,
            slice_type=rt.cfg.slice_type,
            window_start_ms=acc.start_ms,
            window_len_ms=win,
            policy=rt.cfg.policy,
            slice_prbs=rt.cfg.prb_quota,
            records=tuple(records),
        )
        acc.reset(len(rt.idx), self.clock_ms)
        return report


# ---------------------------------------------------------------------- functional API

def run_tti(bs: BsState, rng=None):
    """Advance ``bs`` by one TTI in place and return it.

    The BS carries its own split RNG streams; ``rng`` is accepted for API
    symmetry and ignored.
    """
    bs.run_tti()
    return bs


def apply_quota_schedule(bs: BsState, schedule: QuotaSchedule, t_ms):
    schedule.validate(bs.n_prbs)
    return bs.apply_quota_schedule(schedule, t_ms)


def close_kpi_window(bs: BsState, slice_id):
    return bs.close_kpi_window(slice_id)


def apply_control(bs: BsState, slice_id, policy):
    return bs.apply_control(slice_id, policy)


# ---------------------------------------------------------------------- run loop

class StaticControl:
    """Control source that pins every slice to one scheduler; sends nothing."""

    def __init__(self, policy):
        self.policy = SchedulingPolicy.parse(policy)

    def attach(self, world):
        for bs in world:
            for s in bs.slices:
                bs.apply_control(s.slice_id, self.policy)

    def on_reports(self, reports):
        pass

    def poll_controls(self):
        return []

    def on_control_applied(self, ctrl, ok, t_ms):
        pass

    def close(self):
        pass


@dataclass
class ControlEvent:
    t_ms: int
    control: ControlPayload
    applied: bool


@dataclass
class Trace:
    reports: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_bytes(self):
        """Canonical byte serialization (E2-lite frames in event order)."""
        out = bytearray()
        events = [(r.timestamp_ms, 0, i, r) for i, r in enumerate(self.reports)]
        events += [(c.t_ms, 1, i, c) for i, c in enumerate(self.controls)]
        for _, kind, _, ev in sorted(events, key=lambda e: e[:3]):
            if kind == 0:
                out += encode_frame(MsgType.RIC_INDICATION, encode_indication(ev.to_indication()))
            else:
                out += encode_frame(MsgType.RIC_CONTROL, encode_control(ev.control))
                out += encode_frame(
                    MsgType.RIC_CONTROL_ACK,
                    encode_control_ack(
                        ControlAck(ev.control.bs_id, ev.control.slice_id, 0 if ev.applied else 1, ev.t_ms)
                    ),
                )
        return bytes(out)


def run(world, duration_ms, control_source, rng=None, on_window=None):
    """Advance every BS TTI by TTI for ``duration_ms``.

    Window reports go to ``control_source.on_reports``; controls it returns
    from ``poll_controls`` are applied at the next TTI boundary. A failing
    control source freezes policies at their last value and is recorded as
    a warning; the run itself never stops.
    """
    trace = Trace()
    by_id = {bs.bs_id: bs for bs in world}
    attach = getattr(control_source, "attach", None)
    if attach is not None:
        attach(world)
    source_ok = True
    for _ in range(int(duration_ms)):
        if source_ok:
            try:
                ctrls = control_source.poll_controls()
            except Exception as exc:  # degrade, never halt
                source_ok = _source_failed(trace, exc, by_id)
                ctrls = []
            for c in ctrls:
                bs = by_id.get(c.bs_id)
                t_now = bs.clock_ms if bs is not None else world[0].clock_ms
                ok = bs is not None and bs.apply_control(c.slice_id, c.sched_policy)
                trace.controls.append(ControlEvent(t_now, c, ok))
                try:
                    control_source.on_control_applied(c, ok, t_now)
                except Exception as exc:
                    source_ok = _source_failed(trace, exc, by_id)
        window_reports = []
        for bs in world:
            reps = bs.run_tti()
            if reps:
                window_reports.extend(reps)
        if window_reports:
            trace.reports.extend(window_reports)
            if on_window is not None:
                on_window(window_reports)
            if source_ok:
                try:
                    control_source.on_reports(window_reports)
                except Exception as exc:
                    source_ok = _source_failed(trace, exc, by_id)
    return trace


def _source_failed(trace, exc, by_id):
    t = min(bs.clock_ms for bs in by_id.values())
    msg = f"t={t} ms: control source failed ({exc!r}); policies frozen"
    log.warning(msg)
    trace.warnings.append(msg)
    return False
