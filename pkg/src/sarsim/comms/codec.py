"""22-byte coordination frame.

Layout (little-endian)::

    0      start byte 0xFE
    1      payload length (14)
    2      sequence (wraps at 256)
    3      system id (= uav id)
    4      component id (1)
    5      message id (default 222)
    6..19  payload: uav_id u8, lat i32 (deg*1e7), lon i32 (deg*1e7),
           mission_state u8, timestamp_ms u32
    20..21 CRC-16/X.25 over bytes 1..19
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from ..fsm.mission import MissionState

START_BYTE = 0xFE
PAYLOAD_LEN = 14
FRAME_LEN = 22
COMPONENT_ID = 1
DEFAULT_MESSAGE_ID = 222

_PAYLOAD = struct.Struct("<BiiBI")
_HEADER = struct.Struct("<BBBBBB")
assert _PAYLOAD.size == PAYLOAD_LEN


class CodecError(ValueError):
    pass


class EncodeError(CodecError):
    pass


class FramingError(CodecError):
    pass


class LengthError(CodecError):
    pass


class ChecksumError(CodecError):
    pass


def _crc_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ 0x8408 if crc & 1 else crc >> 1
        table.append(crc)
    return table


_CRC_TABLE = _crc_table()


def crc16_x25(data: bytes) -> int:
    """CRC-16/X.25: reflected poly 0x1021, init 0xFFFF, xorout 0xFFFF."""
    crc = 0xFFFF
    table = _CRC_TABLE
    for b in data:
        crc = (crc >> 8) ^ table[(crc ^ b) & 0xFF]
    return crc ^ 0xFFFF


@dataclass(frozen=True)
class CoordMessage:
    uav_id: int
    lat: float  # degrees
    lon: float  # degrees
    mission_state: MissionState
    timestamp_ms: int

    @property
    def lat_e7(self) -> int:
        return round(self.lat * 1e7)

    @property
    def lon_e7(self) -> int:
        return round(self.lon * 1e7)


@dataclass(frozen=True)
class Frame:
    sequence: int
    system_id: int
    component_id: int
    message_id: int
    message: CoordMessage


def encode_payload(msg: CoordMessage) -> bytes:
    if not 0 <= msg.uav_id <= 255:
        raise EncodeError(f"uav_id {msg.uav_id} does not fit in one byte")
    if not -90.0 <= msg.lat <= 90.0:
        raise EncodeError(f"latitude {msg.lat} out of range")
    if not -180.0 <= msg.lon < 180.0:
        raise EncodeError(f"longitude {msg.lon} out of range")
    if not 0 <= msg.timestamp_ms <= 0xFFFFFFFF:
        raise EncodeError(f"timestamp {msg.timestamp_ms} does not fit in 32 bits")
    try:
        state = MissionState(msg.mission_state)
    except ValueError as exc:
        raise EncodeError(f"unknown mission state {msg.mission_state!r}") from exc
    return _PAYLOAD.pack(msg.uav_id, msg.lat_e7, msg.lon_e7, int(state), msg.timestamp_ms)


def encode(msg: CoordMessage, seq: int, message_id: int = DEFAULT_MESSAGE_ID) -> bytes:
    """Frame ``msg`` with sequence number ``seq`` (taken modulo 256)."""
    if not 0 <= message_id <= 255:
        raise EncodeError(f"message id {message_id} does not fit in one byte")
    payload = encode_payload(msg)
    body = _HEADER.pack(START_BYTE, PAYLOAD_LEN, seq & 0xFF, msg.uav_id, COMPONENT_ID, message_id) + payload
    return body + struct.pack("<H", crc16_x25(body[1:]))


def decode_frame(frame: bytes) -> Frame:
    """Validate and unpack a frame; raises a :class:`CodecError` subclass."""
    if len(frame) < 2 or frame[0] != START_BYTE:
        raise FramingError("missing start byte")
    declared = frame[1]
    # a self-consistent frame of another size is a length error; anything
    # else that is not 22 bytes is a framing error
    if declared != PAYLOAD_LEN and len(frame) == declared + FRAME_LEN - PAYLOAD_LEN:
        raise LengthError(f"payload length {declared} != {PAYLOAD_LEN}")
    if len(frame) != FRAME_LEN:
        raise FramingError(f"frame is {len(frame)} bytes, expected {FRAME_LEN}")
    (crc,) = struct.unpack_from("<H", frame, 20)
    if crc16_x25(frame[1:20]) != crc:
        raise ChecksumError("checksum mismatch")
    if declared != PAYLOAD_LEN:
        raise LengthError(f"payload length {declared} != {PAYLOAD_LEN}")
    _, _, seq, sysid, compid, msgid = _HEADER.unpack_from(frame, 0)
    uav_id, lat_e7, lon_e7, state, ts = _PAYLOAD.unpack_from(frame, 6)
    try:
        mission_state = MissionState(state)
    except ValueError as exc:
        raise CodecError(f"unknown mission state code {state}") from exc
    msg = CoordMessage(uav_id, lat_e7 / 1e7, lon_e7 / 1e7, mission_state, ts)
    return Frame(seq, sysid, compid, msgid, msg)


def decode(frame: bytes) -> CoordMessage:
    return decode_frame(frame).message
