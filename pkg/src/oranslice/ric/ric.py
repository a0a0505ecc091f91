"""Near-real-time RIC: E2 manager, BS registry, message router, xApp host.

The RIC is transport-agnostic. A transport hands each new connection to
:meth:`NearRtRic.connect` and feeds received bytes into the returned
:class:`RicSession`; replies go out through ``connection.send(bytes)``.

With ``inline=True`` indications are handled synchronously on the caller's
thread (bit-exact, used by the deterministic harness). Otherwise each
(bs, slice) xApp gets a worker thread with a one-slot, newest-wins queue.
"""
from __future__ import annotations

import collections
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..drl.catalog import ModelCatalog
from ..e2lite.codec import (
    MAX_REPORT_PERIOD_MS,
    MIN_REPORT_PERIOD_MS,
    ControlPayload,
    FrameDecoder,
    MsgType,
    SetupResponse,
    SubscriptionResponse,
    decode_control_ack,
    decode_indication,
    decode_setup,
    decode_sub,
    encode_message,
)
from ..exceptions import CatalogError, DecodeError, ProtocolError
from ..ran.types import SchedulingPolicy, SliceType
from ..sim.engine import KpiReport
from .xapp import SliceModel, SliceXApp, XAppDescriptor

log = logging.getLogger(__name__)

E2_MANAGER = "e2-manager"
XAPP = "xapp"

STATUS_OK = 0
STATUS_MALFORMED = 1
STATUS_UNKNOWN_BS = 1
STATUS_BAD_PERIOD = 2


@dataclass
class Subscription:
    subscription_id: int
    bs_id: int
    slice_id: int
    period_ms: int


@dataclass
class BsRegistryEntry:
    bs_id: int
    connection: object
    slices: dict  # slice_id -> SliceType
    subscriptions: dict = field(default_factory=dict)  # subscription_id -> Subscription
    connected_at: float = 0.0


class RouteTable:
    """Message type -> endpoint name, total over the inbound types."""

    INBOUND = (
        MsgType.E2_SETUP_REQ,
        MsgType.RIC_SUB_REQ,
        MsgType.RIC_INDICATION,
        MsgType.RIC_CONTROL_ACK,
    )

    def __init__(self, routes=None):
        self.routes = dict(routes or {
            MsgType.E2_SETUP_REQ: E2_MANAGER,
            MsgType.RIC_SUB_REQ: E2_MANAGER,
            MsgType.RIC_CONTROL_ACK: E2_MANAGER,
            MsgType.RIC_INDICATION: XAPP,
        })
        missing = [t.name for t in self.INBOUND if t not in self.routes]
        if missing:
            raise ValueError(f"route table not total; missing {missing}")

    def endpoint(self, msg_type):
        return self.routes.get(MsgType(msg_type))


@dataclass
class XAppRegistration:
    descriptor: XAppDescriptor
    model: object
    factory: object = None


class RicSession:
    """One transport connection as seen by the RIC."""

    def __init__(self, ric, connection):
        self.ric = ric
        self.connection = connection
        self.decoder = FrameDecoder()
        self.closed = False

    def feed(self, data):
        if self.closed:
            return
        try:
            frames = self.decoder.feed(data)
        except ProtocolError as exc:
            log.warning("dropping connection: %s", exc)
            self.ric.counters["protocol_errors"] += 1
            self.close()
            return
        for fr in frames:
            self.ric.on_frame(self, fr)
        if self.decoder.unknown_skipped:
            self.ric.counters["unknown_msg_type"] += self.decoder.unknown_skipped
            self.decoder.unknown_skipped = 0

    def send(self, data):
        self.connection.send(data)

    def close(self):
        if not self.closed:
            self.closed = True
            self.ric.on_disconnect(self)
            try:
                self.connection.close()
            except Exception:  # pragma: no cover - best effort
                pass


class _XAppWorker:
    """Serializes decisions for one xApp; keeps only the newest indication."""

    def __init__(self, ric, xapp):
        self.ric = ric
        self.xapp = xapp
        self._cond = threading.Condition()
        self._slot = None
        self._busy = False
        self._stop = False
        self._thread = threading.Thread(
            target=self._loop, name=f"xapp-{xapp.bs_id}-{xapp.slice_id}", daemon=True
        )
        self._thread.start()

    def submit(self, session, payload):
        with self._cond:
            if self._slot is not None:
                self.ric.counters["stale_dropped"] += 1
            self._slot = (session, payload)
            self._cond.notify()

    def _loop(self):
        while True:
            with self._cond:
                while self._slot is None and not self._stop:
                    self._cond.wait()
                if self._stop:
                    return
                session, payload = self._slot
                self._slot = None
                self._busy = True
            try:
                self.ric._decide_and_send(session, self.xapp, payload)
            finally:
                with self._cond:
                    self._busy = False
                    self._cond.notify_all()

    def idle(self):
        with self._cond:
            return self._slot is None and not self._busy

    def stop(self):
        with self._cond:
            self._stop = True
            self._cond.notify_all()


class NearRtRic:
    def __init__(self, catalog=None, inline=True, routes=None, decision_log=True):
        self.catalog = ModelCatalog(catalog) if isinstance(catalog, (str, Path)) else catalog
        self.inline = inline
        self.routes = RouteTable(routes)
        self.registry = {}
        self.xapps = {}  # (bs_id, slice_id) -> SliceXApp
        self.registrations = {}  # SliceType -> XAppRegistration
        self.counters = collections.Counter()
        self.decisions = [] if decision_log else None
        self.last_decision = {}
        self._subs = {}  # subscription_id -> Subscription
        self._next_sub_id = 1
        self._lock = threading.RLock()
        self._workers = {}
        self._sessions = set()

    # ------------------------------------------------------------------ transport side

    def connect(self, connection):
        s = RicSession(self, connection)
        with self._lock:
            self._sessions.add(s)
        return s

    def on_disconnect(self, session):
        with self._lock:
            self._sessions.discard(session)
            for bs_id, entry in list(self.registry.items()):
                if entry.connection is session:
                    self._drop_bs(bs_id)

    def on_frame(self, session, frame):
        endpoint = self.routes.endpoint(frame.msg_type)
        if endpoint is None:
            self.counters["unexpected_msg_type"] += 1
            return
        try:
            if frame.msg_type == MsgType.E2_SETUP_REQ:
                session.send(encode_message(self._setup_from_wire(session, frame.payload)))
            elif frame.msg_type == MsgType.RIC_SUB_REQ:
                session.send(encode_message(self._sub_from_wire(session, frame.payload)))
            elif frame.msg_type == MsgType.RIC_CONTROL_ACK:
                ack = decode_control_ack(frame.payload)
                self.counters["control_acks" if ack.status == 0 else "control_nacks"] += 1
            elif frame.msg_type == MsgType.RIC_INDICATION:
                self._on_indication(session, decode_indication(frame.payload))
        except DecodeError as exc:
            log.warning("malformed %s payload: %s", MsgType(frame.msg_type).name, exc)
            self.counters["malformed"] += 1

    # ------------------------------------------------------------------ E2 manager

    def _setup_from_wire(self, session, payload):
        try:
            req = decode_setup(payload)
        except DecodeError as exc:
            log.warning("malformed setup request: %s", exc)
            self.counters["malformed"] += 1
            return SetupResponse(0, STATUS_MALFORMED)
        return self.handle_setup(session, req)

    def handle_setup(self, conn, req):
        """Register (or supersede) a BS. Status 0 ok, 1 malformed."""
        try:
            slices = {int(sid): SliceType(st) for sid, st in req.slices}
        except ValueError:
            return SetupResponse(req.bs_id, STATUS_MALFORMED)
        if not slices or len(slices) != len(req.slices):
            return SetupResponse(req.bs_id, STATUS_MALFORMED)
        with self._lock:
            old = self.registry.get(req.bs_id)
            if old is not None:
                self._drop_bs(req.bs_id)
                if old.connection is not conn and old.connection is not None:
                    log.info("BS %d reconnected; superseding old connection", req.bs_id)
                    old_conn = old.connection
                    if isinstance(old_conn, RicSession):
                        old_conn.closed = True
                        self._sessions.discard(old_conn)
                        old_conn = old_conn.connection
                    try:
                        old_conn.close()
                    except Exception:  # pragma: no cover
                        pass
            self.registry[req.bs_id] = BsRegistryEntry(
                bs_id=req.bs_id, connection=conn, slices=slices, connected_at=time.time()
            )
        return SetupResponse(req.bs_id, STATUS_OK)

    def _drop_bs(self, bs_id):
        entry = self.registry.pop(bs_id, None)
        if entry is None:
            return
        for sub_id in entry.subscriptions:
            self._subs.pop(sub_id, None)
        for key in [k for k in self.xapps if k[0] == bs_id]:
            self.xapps.pop(key)
            w = self._workers.pop(key, None)
            if w is not None:
                w.stop()

    def _sub_from_wire(self, session, payload):
        try:
            req = decode_sub(payload)
        except DecodeError:
            self.counters["malformed"] += 1
            return SubscriptionResponse(STATUS_MALFORMED, 0)
        with self._lock:
            entry = self.registry.get(req.bs_id)
            if entry is not None and entry.connection is not session:
                return SubscriptionResponse(STATUS_UNKNOWN_BS, 0)
        return self.handle_subscription(req.bs_id, req)

    def handle_subscription(self, bs_id, req):
        """Allocate a subscription id. Status 0 ok, 1 unknown BS/slice, 2 bad period."""
        with self._lock:
            entry = self.registry.get(bs_id)
            if entry is None or req.slice_id not in entry.slices:
                return SubscriptionResponse(STATUS_UNKNOWN_BS, 0)
            if not MIN_REPORT_PERIOD_MS <= req.report_period_ms <= MAX_REPORT_PERIOD_MS:
                return SubscriptionResponse(STATUS_BAD_PERIOD, 0)
            sub = Subscription(self._next_sub_id, bs_id, req.slice_id, req.report_period_ms)
            self._next_sub_id += 1
            # one live subscription per (bs, slice): a new one replaces the old
            for sid in [s for s, v in entry.subscriptions.items() if v.slice_id == req.slice_id]:
                entry.subscriptions.pop(sid)
                self._subs.pop(sid, None)
            entry.subscriptions[sub.subscription_id] = sub
            self._subs[sub.subscription_id] = sub
            self._bind_xapp(entry, sub)
        return SubscriptionResponse(STATUS_OK, sub.subscription_id)

    # ------------------------------------------------------------------ xApps & catalog

    def load_model_from_catalog(self, entry_id):
        if self.catalog is None:
            raise CatalogError("RIC has no model catalog")
        return SliceModel(self.catalog.get(entry_id))

    def register_xapp(self, descriptor, model=None, factory=None):
        """Bind ``descriptor.slice_type`` to a model (or an xApp factory).

        ``model`` may be a loaded :class:`SliceModel`; if omitted, it is
        loaded from the catalog via ``descriptor.model_ref`` and a missing or
        corrupt entry refuses the registration. Running instances of that
        slice type pick the new model up at their next decision.
        """
        if model is None and factory is None:
            model = self.load_model_from_catalog(descriptor.model_ref)
        reg = XAppRegistration(descriptor, model, factory)
        with self._lock:
            self.registrations[descriptor.slice_type] = reg
            for (bs_id, slice_id), xapp in self.xapps.items():
                if self.registry[bs_id].slices[slice_id] == descriptor.slice_type:
                    if factory is None:
                        xapp.swap_model(model)
        return reg

    def _bind_xapp(self, entry, sub):
        st = entry.slices[sub.slice_id]
        reg = self.registrations.get(st)
        key = (entry.bs_id, sub.slice_id)
        old = self._workers.pop(key, None)
        if old is not None:
            old.stop()
        if reg is None:
            self.xapps.pop(key, None)
            return
        if reg.factory is not None:
            xapp = reg.factory(reg.descriptor, entry.bs_id, sub.slice_id)
        else:
            xapp = SliceXApp(reg.descriptor, reg.model, entry.bs_id, sub.slice_id)
        xapp.period_ms = sub.period_ms
        xapp.slice_type = st
        self.xapps[key] = xapp
        if not self.inline:
            self._workers[key] = _XAppWorker(self, xapp)

    # ------------------------------------------------------------------ routing

    def route(self, msg_type, context=None):
        """Endpoint for a message: a handler name or, for indications, the xApp."""
        endpoint = self.routes.endpoint(msg_type)
        if endpoint != XAPP:
            return endpoint
        with self._lock:
            sub = self._subs.get(context.subscription_id)
            if sub is None or (sub.bs_id, sub.slice_id) != (context.bs_id, context.slice_id):
                return None
            return self.xapps.get((sub.bs_id, sub.slice_id))

    def _on_indication(self, session, ind):
        self.counters["indications"] += 1
        xapp = self.route(MsgType.RIC_INDICATION, ind)
        if xapp is None:
            self.counters["indications_dropped"] += 1
            return
        if self.inline:
            self._decide_and_send(session, xapp, ind)
        else:
            worker = self._workers.get((xapp.bs_id, xapp.slice_id))
            if worker is not None:
                worker.submit(session, ind)

    def dispatch_indication(self, xapp, ind):
        """Run the xApp on one indication; a control only on policy change."""
        report = KpiReport.from_indication(ind, xapp.slice_type, xapp.period_ms)
        try:
            choice = xapp.decide(report)
        except Exception as exc:
            log.error("xApp %s failed on bs=%d slice=%d: %r",
                      xapp.descriptor.xapp_id, ind.bs_id, ind.slice_id, exc)
            self.counters["xapp_errors"] += 1
            return None
        rec = (ind.timestamp_ms, ind.bs_id, ind.slice_id, int(xapp.slice_type),
               ind.slice_prbs, ind.sched_policy, int(choice))
        with self._lock:
            self.counters["decisions"] += 1
            if self.decisions is not None:
                self.decisions.append(rec)
            self.last_decision[(ind.bs_id, ind.slice_id)] = rec
        if int(choice) == ind.sched_policy:
            return None
        return ControlPayload(ind.bs_id, ind.slice_id, int(choice), ind.timestamp_ms)

    def _decide_and_send(self, session, xapp, ind):
        ctrl = self.dispatch_indication(xapp, ind)
        if ctrl is not None:
            self.counters["controls_sent"] += 1
            session.send(encode_message(ctrl))

    # ------------------------------------------------------------------ telemetry

    def wait_idle(self, timeout=5.0):
        """Block until all xApp workers are drained (threaded mode)."""
        end = time.monotonic() + timeout
        while time.monotonic() < end:
            if all(w.idle() for w in list(self._workers.values())):
                return True
            time.sleep(0.001)
        return False

    def status(self):
        with self._lock:
            return {
                "base_stations": [
                    {
                        "bs_id": e.bs_id,
                        "connected_at": e.connected_at,
                        "slices": {str(k): v.name for k, v in sorted(e.slices.items())},
                        "subscriptions": [
                            {"subscription_id": s.subscription_id, "slice_id": s.slice_id,
                             "period_ms": s.period_ms}
                            for s in e.subscriptions.values()
                        ],
                    }
                    for e in sorted(self.registry.values(), key=lambda e: e.bs_id)
                ],
                "xapps": {
                    f"{b}/{s}": {
                        "xapp_id": x.descriptor.xapp_id,
                        "model": getattr(getattr(x, "model", None), "entry_id", None),
                    }
                    for (b, s), x in sorted(self.xapps.items())
                },
                "last_decisions": {
                    f"{b}/{s}": {
                        "timestamp_ms": r[0], "slice_prbs": r[4],
                        "policy_in_force": SchedulingPolicy(r[5]).name,
                        "chosen": SchedulingPolicy(r[6]).name,
                    }
                    for (b, s), r in sorted(self.last_decision.items())
                },
                "counters": dict(sorted(self.counters.items())),
            }

    def write_status(self, path):
        path = Path(path)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.status(), indent=1))
        tmp.replace(path)
        return path

    def close(self):
        with self._lock:
            for w in self._workers.values():
                w.stop()
            self._workers.clear()
            for s in list(self._sessions):
                s.close()
