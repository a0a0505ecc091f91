"""E2-lite: framing, payload codecs and transports for the RIC <-> BS link."""

from .codec import (
    DEFAULT_PORT,
    HEADER_SIZE,
    MAX_PAYLOAD,
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
    check_report_period,
    decode_control,
    decode_control_ack,
    decode_frame,
    decode_indication,
    decode_message,
    decode_setup,
    decode_setup_response,
    decode_sub,
    decode_sub_response,
    encode_control,
    encode_control_ack,
    encode_frame,
    encode_indication,
    encode_message,
    encode_setup,
    encode_setup_response,
    encode_sub,
    encode_sub_response,
    indication_size,
)
from .transport import LoopbackLink, SocketLink
from .golden import GoldenVector, load_golden_vectors
