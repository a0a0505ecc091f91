class ConfigurationError(ValueError):
    """Invalid scenario, schedule or radio configuration."""


class ProtocolError(Exception):
    """Unrecoverable framing error; the connection must be dropped."""


class DecodeError(ValueError):
    """A complete frame carried a malformed payload."""


class EncodeError(ValueError):
    """A message could not be serialized under the wire constraints."""


class UnknownMessageType(DecodeError):
    """Frame with an unassigned msg_type. Framing is intact; skip it."""

    def __init__(self, msg_type, consumed):
        super().__init__(f"unknown msg_type 0x{msg_type:02X}")
        self.msg_type = msg_type
        self.consumed = consumed


class CatalogError(Exception):
    """Missing, corrupt or malformed model catalog entry."""
