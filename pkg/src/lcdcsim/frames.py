"""Bit-exact codec for the in-band stage control frame.

Wire layout (big-endian, 64 bytes total)::

    0   dst MAC      6 B
    6   src MAC      6 B
    12  ethertype    2 B   0x9100
    14  sender id    4 B
    18  stage id     2 B   top 4 bits opcode, low 12 bits stage number
    20  TTL          2 B
    22  zero padding to 64 B
"""

from __future__ import annotations

import functools

import struct
from dataclasses import dataclass
from enum import IntEnum

ETHERTYPE_LCDC = 0x9100
FRAME_SIZE = 64
_HEADER = struct.Struct("!6s6sHIHH")
_PAD = bytes(FRAME_SIZE - _HEADER.size)


class Opcode(IntEnum):
    ENABLE = 0
    DISABLE = 1
    ACK_ENABLE = 2
    ACK_DISABLE = 3
    # sent by the non-owning end of a gated link whose egress queue is congested
    STAGE_REQUEST = 4


class FrameError(ValueError):
    pass


class MalformedFrame(FrameError):
    pass


class NotControl(FrameError):
    """The frame is an ordinary data frame (ethertype is not 0x9100)."""


@dataclass(frozen=True)
class ControlFrame:
    dst_mac: int
    src_mac: int
    sender_id: int
    opcode: int
    stage: int
    ttl: int

    def __post_init__(self) -> None:
        if not 0 <= self.dst_mac < 1 << 48 or not 0 <= self.src_mac < 1 << 48:
            raise FrameError("MAC addresses are 48-bit")
        if not 0 <= self.sender_id < 1 << 32:
            raise FrameError("sender id is 32-bit")
        if not 0 <= self.opcode < 16:
            raise FrameError("opcode is 4-bit")
        if not 0 <= self.stage < 1 << 12:
            raise FrameError("stage number is 12-bit")
        if not 0 <= self.ttl < 1 << 16:
            raise FrameError("TTL is 16-bit")

    @property
    def stage_id(self) -> int:
        return (self.opcode << 12) | self.stage

    def with_ttl(self, ttl: int) -> "ControlFrame":
        return ControlFrame(self.dst_mac, self.src_mac, self.sender_id, self.opcode, self.stage, ttl)


def encode_control(frame: ControlFrame) -> bytes:
    header = _HEADER.pack(
        frame.dst_mac.to_bytes(6, "big"),
        frame.src_mac.to_bytes(6, "big"),
        ETHERTYPE_LCDC,
        frame.sender_id,
        frame.stage_id,
        frame.ttl,
    )
    return header + _PAD


def ethertype_of(data: bytes) -> int:
    if len(data) < 14:
        raise MalformedFrame(f"frame of {len(data)} bytes has no ethertype")
    return (data[12] << 8) | data[13]


@functools.lru_cache(maxsize=4096)
def decode_control(data: bytes) -> ControlFrame:
    """Parse a control frame. Cached: flooded copies carry identical bytes."""
    if ethertype_of(data) != ETHERTYPE_LCDC:
        raise NotControl(f"ethertype 0x{ethertype_of(data):04x}")
    if len(data) != FRAME_SIZE:
        raise MalformedFrame(f"control frame must be {FRAME_SIZE} bytes, got {len(data)}")
    dst, src, _, sender, stage_id, ttl = _HEADER.unpack_from(data)
    opcode = stage_id >> 12
    if opcode in Opcode._value2member_map_:
        opcode = Opcode(opcode)
    return ControlFrame(
        int.from_bytes(dst, "big"), int.from_bytes(src, "big"), sender, opcode, stage_id & 0xFFF, ttl
    )
