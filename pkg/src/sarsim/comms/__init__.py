"""Coordination messages, transports and drop-zone arbitration."""

from .broadcast import (
    DEFAULT_PERIOD_MS,
    Broadcaster,
    ReceiveStats,
    StateSnapshot,
    broadcast_loop,
    receive_into,
    snapshot_message,
)
from .codec import (
    DEFAULT_MESSAGE_ID,
    FRAME_LEN,
    PAYLOAD_LEN,
    ChecksumError,
    CodecError,
    CoordMessage,
    EncodeError,
    Frame,
    FramingError,
    LengthError,
    crc16_x25,
    decode,
    decode_frame,
    encode,
    encode_payload,
)
from .peers import Arbitration, DropZoneArbiter, PeerRecord, PeerTable, PeerView, arbitrate
from .transport import LinkModel, SimEndpoint, SimNetwork, UdpTransport, parse_address
