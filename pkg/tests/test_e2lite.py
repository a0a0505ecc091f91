import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oranslice.e2lite import (
    ControlAck,
    ControlPayload,
    Frame,
    FrameDecoder,
    IndicationPayload,
    MsgType,
    NeedMore,
    SetupRequest,
    SetupResponse,
    SubscriptionRequest,
    SubscriptionResponse,
    UeRecord,
    decode_control,
    decode_frame,
    decode_indication,
    decode_message,
    decode_setup,
    encode_control,
    encode_frame,
    encode_indication,
    encode_message,
    encode_setup,
    encode_sub,
    indication_size,
    load_golden_vectors,
)
from oranslice.exceptions import DecodeError, EncodeError, ProtocolError, UnknownMessageType

GOLDEN = load_golden_vectors()


def _as_plain(obj):
    d = dataclasses.asdict(obj)
    for k, v in d.items():
        if isinstance(v, tuple):
            d[k] = [list(x) if isinstance(x, tuple) else x for x in v]
    return d


def test_golden_file_size():
    assert len(GOLDEN) >= 20
    assert any(v.frame.hex().upper() == "E25A01060000000E00000001000200000000000003E8" for v in GOLDEN)


@pytest.mark.parametrize("vec", GOLDEN, ids=[v.name for v in GOLDEN])
def test_golden_vector(vec):
    if vec.kind == "error":
        with pytest.raises(ProtocolError):
            decode_frame(vec.frame)
        return
    if vec.kind == "unknown":
        with pytest.raises(UnknownMessageType) as ei:
            decode_frame(vec.frame)
        assert ei.value.msg_type == vec.expected["msg_type"]
        assert ei.value.consumed == vec.expected["consumed"]
        return
    fr, used = decode_frame(vec.frame)
    assert used == len(vec.frame)
    if vec.kind == "frame":
        assert fr == Frame(vec.expected["msg_type"], bytes.fromhex(vec.expected["payload"]))
        assert encode_frame(fr.msg_type, fr.payload) == vec.frame
        return
    exp = dict(vec.expected)
    assert MsgType(fr.msg_type).name == exp.pop("type")
    msg = decode_message(fr)
    assert _as_plain(msg) == exp
    assert encode_message(msg) == vec.frame


def test_control_example_bytes():
    frame = encode_message(ControlPayload(bs_id=1, slice_id=0, sched_policy=2, timestamp_ms=1000))
    assert frame.hex().upper() == "E25A01060000000E00000001000200000000000003E8"


def test_empty_frame():
    assert encode_frame(0x02, b"") == bytes.fromhex("E25A010200000000")


def test_oversize_payload_rejected():
    with pytest.raises(EncodeError):
        encode_frame(0x05, bytes((1 << 24) + 1))


def test_need_more():
    frame = encode_message(ControlPayload(1, 0, 2, 1000))
    res, used = decode_frame(frame[:7])
    assert isinstance(res, NeedMore) and res.n == 1 and used == 0
    res, _ = decode_frame(frame[:-3])
    assert res.n == 3


def test_bad_magic():
    with pytest.raises(ProtocolError):
        decode_frame(b"\xff\xff\x01\x05\x00\x00\x00\x00")


def test_length_overflow_is_protocol_error():
    with pytest.raises(ProtocolError):
        decode_frame(bytes.fromhex("E25A0105") + (1 << 25).to_bytes(4, "big"))


def test_two_frames_first_only():
    a = encode_message(ControlPayload(1, 0, 2, 1000))
    b = encode_message(SubscriptionResponse(0, 5))
    fr, used = decode_frame(a + b)
    assert used == len(a)
    assert decode_message(fr) == ControlPayload(1, 0, 2, 1000)


def test_sizes():
    assert UeRecord.SIZE == 36
    assert len(UeRecord(1).pack()) == 36
    three = IndicationPayload(1, 1, 0, 500, 0, 5, tuple(UeRecord(i) for i in range(3)))
    assert len(encode_message(three)) == 138
    idle = IndicationPayload(1, 1, 0, 500, 0, 5, ())
    frame = encode_message(idle)
    assert len(frame) == 30
    assert decode_message(decode_frame(frame)[0]).records == ()
    for n in range(20):
        assert indication_size(n) == 22 + 36 * n


def test_per_ue_overhead_at_500ms():
    # two reports per second, 36 bytes of record each
    assert 2 * UeRecord.SIZE == 72


def test_setup_payload_size():
    assert len(encode_setup(SetupRequest(1, ((0, 0), (1, 1), (2, 2))))) == 11


def test_sub_period_validated_at_encode():
    req = SubscriptionRequest(1, 2, 500)
    assert decode_message(decode_frame(encode_message(req))[0]) == req
    for bad in (5, 9, 1001, 2000):
        with pytest.raises(EncodeError):
            encode_sub(SubscriptionRequest(1, 2, bad))
    # the RIC still has to cope with out-of-range periods from foreign encoders
    assert len(encode_sub(SubscriptionRequest(1, 2, 2000), validate=False)) == 9


def test_control_policy_range():
    with pytest.raises(EncodeError):
        encode_control(ControlPayload(1, 0, 3, 0))
    with pytest.raises(DecodeError):
        decode_control(bytes.fromhex("0000000100030000000000000000"))


def test_truncated_and_mismatched_payloads():
    good = encode_indication(IndicationPayload(1, 1, 0, 0, 0, 5, (UeRecord(1), UeRecord(2))))
    with pytest.raises(DecodeError):
        decode_indication(good[:-1])
    with pytest.raises(DecodeError):
        decode_indication(good + b"\x00")
    with pytest.raises(DecodeError):
        decode_control(b"\x00" * 13)
    with pytest.raises(DecodeError):
        decode_setup(bytes.fromhex("0000000103000001"))


def test_unknown_type_skipped_by_decoder():
    a = encode_message(ControlPayload(1, 0, 2, 1000))
    junk = bytes.fromhex("E25A017F00000002ABCD")
    b = encode_message(SubscriptionResponse(0, 7))
    dec = FrameDecoder()
    frames = dec.feed(a + junk + b)
    assert [f.msg_type for f in frames] == [MsgType.RIC_CONTROL, MsgType.RIC_SUB_RESP]
    assert dec.unknown_skipped == 1


# ---------------------------------------------------------------------------- randomized

def _u(rng, bits):
    return int(rng.integers(0, 1 << bits, dtype=np.uint64)) if bits == 64 else int(rng.integers(0, 1 << bits))


def _rand_record(rng):
    return UeRecord(
        _u(rng, 32), _u(rng, 32), _u(rng, 32), _u(rng, 32), _u(rng, 32), _u(rng, 32),
        int(rng.integers(-32768, 32768)), _u(rng, 16), _u(rng, 16), _u(rng, 16),
        _u(rng, 8), _u(rng, 8), 0,
    )


def _rand_message(kind, rng):
    if kind == "indication":
        n = int(rng.integers(0, 12))
        return IndicationPayload(_u(rng, 32), _u(rng, 32), _u(rng, 8), _u(rng, 64), int(rng.integers(0, 3)),
                                 _u(rng, 16), tuple(_rand_record(rng) for _ in range(n)))
    if kind == "control":
        return ControlPayload(_u(rng, 32), _u(rng, 8), int(rng.integers(0, 3)), _u(rng, 64))
    if kind == "ack":
        return ControlAck(_u(rng, 32), _u(rng, 8), _u(rng, 8), _u(rng, 64))
    if kind == "setup":
        n = int(rng.integers(0, 10))
        return SetupRequest(_u(rng, 32), tuple((_u(rng, 8), _u(rng, 8)) for _ in range(n)))
    if kind == "setup_resp":
        return SetupResponse(_u(rng, 32), _u(rng, 8))
    if kind == "sub":
        return SubscriptionRequest(_u(rng, 32), _u(rng, 8), int(rng.integers(10, 1001)))
    return SubscriptionResponse(_u(rng, 8), _u(rng, 32))


KINDS = ("indication", "control", "ack", "setup", "setup_resp", "sub", "sub_resp")


@pytest.mark.parametrize("kind", KINDS)
def test_roundtrip_10k(kind):
    rng = np.random.default_rng(abs(hash(kind)) % 2**32)
    for _ in range(10_000):
        msg = _rand_message(kind, rng)
        fr, used = decode_frame(encode_message(msg))
        assert decode_message(fr) == msg


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 40), min_size=1, max_size=30))
def test_decoder_prefix_safe(seed, cuts):
    rng = np.random.default_rng(seed)
    msgs = [_rand_message(KINDS[int(rng.integers(0, len(KINDS)))], rng) for _ in range(8)]
    stream = b"".join(encode_message(m) for m in msgs)
    whole = FrameDecoder().feed(stream)
    bytewise = FrameDecoder()
    one = [f for i in range(len(stream)) for f in bytewise.feed(stream[i:i + 1])]
    chunked = FrameDecoder()
    got, pos, k = [], 0, 0
    while pos < len(stream):
        step = cuts[k % len(cuts)]
        got += chunked.feed(stream[pos:pos + step])
        pos += step
        k += 1
    assert whole == one == got
    assert [decode_message(f) for f in whole] == msgs
    assert bytewise.pending == 0
