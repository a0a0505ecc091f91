"""Bit-exact codec for the E2-lite application protocol and slice-control SM.

Frame layout (big-endian)::

    +------+------+---------+----------+-----------+---------+
    | 0xE2 | 0x5A | version | msg_type | length u32| payload |
    +------+------+---------+----------+-----------+---------+

``length`` counts payload bytes only. Every payload is a fixed struct
layout; see the ``*_STRUCT`` constants below.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from ..exceptions import DecodeError, EncodeError, ProtocolError, UnknownMessageType

MAGIC = b"\xe2\x5a"
VERSION = 0x01
HEADER = struct.Struct(">2sBBI")
HEADER_SIZE = HEADER.size  # 8
MAX_PAYLOAD = 1 << 24

DEFAULT_PORT = 36421
MIN_REPORT_PERIOD_MS = 10
MAX_REPORT_PERIOD_MS = 1000

UE_RECORD = struct.Struct(">IIIIIIhHHHBBH")  # 36 bytes
INDICATION_HEADER = struct.Struct(">IIBQBHH")  # 22 bytes
CONTROL = struct.Struct(">IBBQ")  # 14 bytes
CONTROL_ACK = struct.Struct(">IBBQ")  # 14 bytes
SETUP_REQ_HEADER = struct.Struct(">IB")  # 5 bytes
SETUP_REQ_SLICE = struct.Struct(">BB")
SETUP_RESP = struct.Struct(">IB")
SUB_REQ = struct.Struct(">IBI")  # 9 bytes
SUB_RESP = struct.Struct(">BI")  # 5 bytes


class MsgType(enum.IntEnum):
    E2_SETUP_REQ = 0x01
    E2_SETUP_RESP = 0x02
    RIC_SUB_REQ = 0x03
    RIC_SUB_RESP = 0x04
    RIC_INDICATION = 0x05
    RIC_CONTROL = 0x06
    RIC_CONTROL_ACK = 0x07


@dataclass(frozen=True)
class Frame:
    msg_type: int
    payload: bytes


@dataclass(frozen=True)
class NeedMore:
    """Incomplete input; at least ``n`` more bytes are required."""

    n: int


# --------------------------------------------------------------------------- frames

def encode_frame(msg_type, payload=b""):
    payload = bytes(payload)
    if len(payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    if not 0 <= int(msg_type) <= 0xFF:
        raise EncodeError(f"msg_type {msg_type} does not fit in one byte")
    return HEADER.pack(MAGIC, VERSION, int(msg_type), len(payload)) + payload


def decode_frame(buf):
    """Decode one frame from the front of ``buf``.

    Returns ``(Frame, consumed)`` or ``(NeedMore(n), 0)``. Bytes after the
    first frame are left untouched. Raises :class:`ProtocolError` on bad
    magic/version/length, :class:`UnknownMessageType` (carrying the number
    of bytes to skip) for a complete frame of an unassigned type.
    """
    # reject garbage as soon as the leading bytes disagree with the header
    head = bytes(buf[:3])
    if head[:2] != MAGIC[: len(head[:2])]:
        raise ProtocolError(f"bad magic {head[:2].hex()}")
    if len(head) == 3 and head[2] != VERSION:
        raise ProtocolError(f"unsupported version {head[2]}")
    n = len(buf)
    if n < HEADER_SIZE:
        return NeedMore(HEADER_SIZE - n), 0
    _, _, msg_type, length = HEADER.unpack_from(buf)
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"declared length {length} exceeds {MAX_PAYLOAD}")
    total = HEADER_SIZE + length
    if n < total:
        return NeedMore(total - n), 0
    if msg_type not in _KNOWN_TYPES:
        raise UnknownMessageType(msg_type, total)
    return Frame(msg_type, bytes(buf[HEADER_SIZE:total])), total


_KNOWN_TYPES = frozenset(int(t) for t in MsgType)


class FrameDecoder:
    """Incremental stream decoder; prefix-safe under arbitrary chunking."""

    def __init__(self):
        self._buf = bytearray()
        self.unknown_skipped = 0

    def feed(self, data):
        """Append ``data`` and return every frame completed by it."""
        self._buf += data
        frames = []
        while self._buf:
            try:
                res, used = decode_frame(self._buf)
            except UnknownMessageType as exc:
                del self._buf[: exc.consumed]
                self.unknown_skipped += 1
                continue
            if isinstance(res, NeedMore):
                break
            frames.append(res)
            del self._buf[:used]
        return frames

    @property
    def pending(self):
        return len(self._buf)


# --------------------------------------------------------------------------- payloads

@dataclass(frozen=True)
class UeRecord:
    ue_id: int
    dl_buffer_bytes: int = 0
    tx_bytes: int = 0
    tx_pkts: int = 0
    dl_thr_bps: int = 0
    ul_thr_bps: int = 0
    sinr_cdb: int = 0
    granted_prbs: int = 0
    requested_prbs: int = 0
    bler_permille: int = 0
    dl_cqi: int = 0
    dl_mcs: int = 0
    reserved: int = 0

    SIZE = UE_RECORD.size

    def pack(self):
        return _pack(
            UE_RECORD,
            self.ue_id, self.dl_buffer_bytes, self.tx_bytes, self.tx_pkts,
            self.dl_thr_bps, self.ul_thr_bps, self.sinr_cdb, self.granted_prbs,
            self.requested_prbs, self.bler_permille, self.dl_cqi, self.dl_mcs,
            self.reserved,
        )

    @classmethod
    def unpack(cls, data, offset=0):
        return cls(*UE_RECORD.unpack_from(data, offset))


@dataclass(frozen=True)
class IndicationPayload:
    subscription_id: int
    bs_id: int
    slice_id: int
    timestamp_ms: int
    sched_policy: int
    slice_prbs: int
    records: tuple = field(default_factory=tuple)

    @property
    def num_ues(self):
        return len(self.records)


@dataclass(frozen=True)
class ControlPayload:
    bs_id: int
    slice_id: int
    sched_policy: int
    timestamp_ms: int


@dataclass(frozen=True)
class ControlAck:
    """Acknowledgement of a RIC Control. ``status`` 0 = applied."""

    bs_id: int
    slice_id: int
    status: int
    timestamp_ms: int


@dataclass(frozen=True)
class SetupRequest:
    bs_id: int
    slices: tuple = ()  # (slice_id, slice_type) pairs


@dataclass(frozen=True)
class SetupResponse:
    bs_id: int
    status: int


@dataclass(frozen=True)
class SubscriptionRequest:
    bs_id: int
    slice_id: int
    report_period_ms: int


@dataclass(frozen=True)
class SubscriptionResponse:
    status: int
    subscription_id: int


def _pack(st, *values):
    try:
        return st.pack(*(int(v) for v in values))
    except struct.error as exc:
        raise EncodeError(f"field out of range: {exc}") from None


def _expect_len(payload, n, what):
    if len(payload) != n:
        raise DecodeError(f"{what}: expected {n} payload bytes, got {len(payload)}")


def encode_indication(p: IndicationPayload):
    head = _pack(
        INDICATION_HEADER, p.subscription_id, p.bs_id, p.slice_id, p.timestamp_ms,
        p.sched_policy, p.slice_prbs, len(p.records),
    )
    return head + b"".join(r.pack() for r in p.records)


def decode_indication(payload):
    if len(payload) < INDICATION_HEADER.size:
        raise DecodeError(f"indication truncated at {len(payload)} bytes")
    sub, bs, sl, ts, pol, prbs, n = INDICATION_HEADER.unpack_from(payload)
    _expect_len(payload, INDICATION_HEADER.size + UE_RECORD.size * n, "indication")
    recs = tuple(
        UeRecord.unpack(payload, INDICATION_HEADER.size + i * UE_RECORD.size) for i in range(n)
    )
    return IndicationPayload(sub, bs, sl, ts, pol, prbs, recs)


def indication_size(num_ues):
    """Payload bytes of an indication carrying ``num_ues`` records."""
    return INDICATION_HEADER.size + UE_RECORD.size * num_ues


def encode_control(p: ControlPayload):
    if p.sched_policy not in (0, 1, 2):
        raise EncodeError(f"sched_policy {p.sched_policy} not a scheduler code")
    return _pack(CONTROL, p.bs_id, p.slice_id, p.sched_policy, p.timestamp_ms)


def decode_control(payload):
    _expect_len(payload, CONTROL.size, "control")
    p = ControlPayload(*CONTROL.unpack(payload))
    if p.sched_policy not in (0, 1, 2):
        raise DecodeError(f"sched_policy {p.sched_policy} not a scheduler code")
    return p


def encode_control_ack(p: ControlAck):
    return _pack(CONTROL_ACK, p.bs_id, p.slice_id, p.status, p.timestamp_ms)


def decode_control_ack(payload):
    _expect_len(payload, CONTROL_ACK.size, "control ack")
    return ControlAck(*CONTROL_ACK.unpack(payload))


def encode_setup(p: SetupRequest):
    if len(p.slices) > 0xFF:
        raise EncodeError("at most 255 slices per setup")
    out = _pack(SETUP_REQ_HEADER, p.bs_id, len(p.slices))
    return out + b"".join(_pack(SETUP_REQ_SLICE, sid, st) for sid, st in p.slices)


def decode_setup(payload):
    if len(payload) < SETUP_REQ_HEADER.size:
        raise DecodeError("setup request truncated")
    bs, n = SETUP_REQ_HEADER.unpack_from(payload)
    _expect_len(payload, SETUP_REQ_HEADER.size + SETUP_REQ_SLICE.size * n, "setup request")
    slices = tuple(
        SETUP_REQ_SLICE.unpack_from(payload, SETUP_REQ_HEADER.size + 2 * i) for i in range(n)
    )
    return SetupRequest(bs, slices)


def encode_setup_response(p: SetupResponse):
    return _pack(SETUP_RESP, p.bs_id, p.status)


def decode_setup_response(payload):
    _expect_len(payload, SETUP_RESP.size, "setup response")
    return SetupResponse(*SETUP_RESP.unpack(payload))


def check_report_period(period_ms):
    if not MIN_REPORT_PERIOD_MS <= period_ms <= MAX_REPORT_PERIOD_MS:
        raise EncodeError(
            f"report period {period_ms} ms outside "
            f"[{MIN_REPORT_PERIOD_MS}, {MAX_REPORT_PERIOD_MS}] ms"
        )
    return period_ms


def encode_sub(p: SubscriptionRequest, validate=True):
    if validate:
        check_report_period(p.report_period_ms)
    return _pack(SUB_REQ, p.bs_id, p.slice_id, p.report_period_ms)


def decode_sub(payload):
    _expect_len(payload, SUB_REQ.size, "subscription request")
    return SubscriptionRequest(*SUB_REQ.unpack(payload))


def encode_sub_response(p: SubscriptionResponse):
    return _pack(SUB_RESP, p.status, p.subscription_id)


def decode_sub_response(payload):
    _expect_len(payload, SUB_RESP.size, "subscription response")
    return SubscriptionResponse(*SUB_RESP.unpack(payload))


# --------------------------------------------------------------------------- messages

_ENCODERS = {
    SetupRequest: (MsgType.E2_SETUP_REQ, encode_setup),
    SetupResponse: (MsgType.E2_SETUP_RESP, encode_setup_response),
    SubscriptionRequest: (MsgType.RIC_SUB_REQ, encode_sub),
    SubscriptionResponse: (MsgType.RIC_SUB_RESP, encode_sub_response),
    IndicationPayload: (MsgType.RIC_INDICATION, encode_indication),
    ControlPayload: (MsgType.RIC_CONTROL, encode_control),
    ControlAck: (MsgType.RIC_CONTROL_ACK, encode_control_ack),
}

_DECODERS = {
    MsgType.E2_SETUP_REQ: decode_setup,
    MsgType.E2_SETUP_RESP: decode_setup_response,
    MsgType.RIC_SUB_REQ: decode_sub,
    MsgType.RIC_SUB_RESP: decode_sub_response,
    MsgType.RIC_INDICATION: decode_indication,
    MsgType.RIC_CONTROL: decode_control,
    MsgType.RIC_CONTROL_ACK: decode_control_ack,
}


def encode_message(msg):
    """Serialize a payload object into a complete frame."""
    try:
        msg_type, enc = _ENCODERS[type(msg)]
    except KeyError:
        raise EncodeError(f"no wire encoding for {type(msg).__name__}") from None
    return encode_frame(msg_type, enc(msg))


def decode_message(frame: Frame):
    """Decode a frame's payload into the matching payload object."""
    return _DECODERS[MsgType(frame.msg_type)](frame.payload)
