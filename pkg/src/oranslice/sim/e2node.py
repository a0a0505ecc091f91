"""BS-side E2 agent: the simulator's control source when a RIC is in the loop."""
from __future__ import annotations

import logging

from ..e2lite.codec import (
    ControlAck,
    MsgType,
    SetupRequest,
    SubscriptionRequest,
    decode_control,
    decode_setup_response,
    decode_sub_response,
    encode_message,
)
from ..e2lite.transport import LoopbackLink, SocketLink
from ..exceptions import DecodeError, ProtocolError

log = logging.getLogger(__name__)


class RicControl:
    """Control source that talks to a RIC over E2-lite.

    ``connect`` maps a bs_id to a fresh link (one connection per BS). On
    ``attach`` every BS performs setup and subscribes each slice at
    ``period_ms``; any failure there raises before the first TTI. Reports
    leave as indications, controls are polled each TTI, and each applied or
    rejected control is acknowledged.
    """

    def __init__(self, connect, period_ms=500, timeout=5.0):
        self.connect = connect
        self.period_ms = int(period_ms)
        self.timeout = timeout
        self.links = {}
        self.subscriptions = {}  # (bs_id, slice_id) -> subscription_id
        self.controls_received = 0
        self.acks_sent = 0
        self.indications_sent = 0
        self.ue_record_bytes = 0

    @classmethod
    def loopback(cls, ric, **kwargs):
        return cls(lambda bs_id: LoopbackLink(ric), **kwargs)

    @classmethod
    def tcp(cls, host="127.0.0.1", port=None, **kwargs):
        extra = {} if port is None else {"port": port}
        return cls(lambda bs_id: SocketLink(host, **extra), **kwargs)

    def attach(self, world):
        for bs in world:
            link = self.connect(bs.bs_id)
            self.links[bs.bs_id] = link
            req = SetupRequest(bs.bs_id, tuple((s.slice_id, int(s.slice_type)) for s in bs.slices))
            fr = link.request(encode_message(req), MsgType.E2_SETUP_RESP, self.timeout)
            resp = decode_setup_response(fr.payload)
            if resp.status != 0:
                raise ProtocolError(f"BS {bs.bs_id}: E2 setup refused (status {resp.status})")
            for s in bs.slices:
                sub = SubscriptionRequest(bs.bs_id, s.slice_id, self.period_ms)
                fr = link.request(encode_message(sub), MsgType.RIC_SUB_RESP, self.timeout)
                sr = decode_sub_response(fr.payload)
                if sr.status != 0:
                    raise ProtocolError(
                        f"BS {bs.bs_id} slice {s.slice_id}: subscription refused (status {sr.status})"
                    )
                self.subscriptions[(bs.bs_id, s.slice_id)] = sr.subscription_id
                bs.set_report_period(self.period_ms, s.slice_id)

    def on_reports(self, reports):
        for r in reports:
            sub_id = self.subscriptions.get((r.bs_id, r.slice_id))
            if sub_id is None:
                continue
            self.links[r.bs_id].send(encode_message(r.to_indication(sub_id)))
            self.indications_sent += 1
            self.ue_record_bytes += 36 * r.num_ues

    def poll_controls(self):
        out = []
        for bs_id, link in self.links.items():
            for fr in link.recv_frames():
                if fr.msg_type != MsgType.RIC_CONTROL:
                    log.debug("BS %d: ignoring %s", bs_id, MsgType(fr.msg_type).name)
                    continue
                try:
                    ctrl = decode_control(fr.payload)
                except DecodeError as exc:
                    log.warning("BS %d: malformed control: %s", bs_id, exc)
                    continue
                if ctrl.bs_id != bs_id:
                    log.warning("BS %d: control addressed to BS %d ignored", bs_id, ctrl.bs_id)
                    continue
                self.controls_received += 1
                out.append(ctrl)
        return out

    def on_control_applied(self, ctrl, ok, t_ms):
        ack = ControlAck(ctrl.bs_id, ctrl.slice_id, 0 if ok else 1, t_ms)
        self.links[ctrl.bs_id].send(encode_message(ack))
        self.acks_sent += 1

    def close(self):
        for link in self.links.values():
            link.close()
