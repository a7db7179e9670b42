"""Binary framing for the worker/dispatcher socket protocol.

Every message is a fixed 18-byte header followed by a payload. All integers
are little-endian. Query and score payloads carry a 4-byte element count and
then that many IEEE float64 values, so the network path is bit-comparable
with the in-process simulator.
"""

from __future__ import annotations

import asyncio
import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ProtocolError

MAGIC = b"AXIF"
PROTOCOL_VERSION = 1

_HEADER = struct.Struct("<4sBBQI")
HEADER_SIZE = _HEADER.size

# refuse absurd frames before allocating for them
MAX_PAYLOAD = 16 * 1024 * 1024

_U32 = struct.Struct("<I")
_ERR_HEAD = struct.Struct("<H")


class MsgType(IntEnum):
    HELLO = 1
    PREDICT_REQ = 2
    PREDICT_RESP = 3
    ERROR = 4
    PING = 5


class ErrorCode(IntEnum):
    DIMENSION_MISMATCH = 1
    MALFORMED_PAYLOAD = 2
    UNSUPPORTED_TYPE = 3
    INTERNAL = 4


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    request_id: int
    payload: bytes = b""
    version: int = PROTOCOL_VERSION


def encode_frame(frame: Frame) -> bytes:
    if not 0 <= frame.request_id < 2**64:
        raise ProtocolError(f"request_id {frame.request_id} out of u64 range")
    if len(frame.payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload of {len(frame.payload)} bytes exceeds cap")
    header = _HEADER.pack(
        MAGIC, frame.version, int(frame.msg_type), frame.request_id, len(frame.payload)
    )
    return header + frame.payload


def decode_frame(buf: bytes) -> tuple[Frame, int]:
    """Parse one frame from the head of ``buf``; return it and the bytes consumed."""
    if len(buf) < HEADER_SIZE:
        raise ProtocolError("truncated frame header")
    magic, version, msg_type, request_id, payload_len = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    try:
        kind = MsgType(msg_type)
    except ValueError as exc:
        raise ProtocolError(f"unknown message type {msg_type}") from exc
    if payload_len > MAX_PAYLOAD:
        raise ProtocolError(f"declared payload of {payload_len} bytes exceeds cap")
    end = HEADER_SIZE + payload_len
    if len(buf) < end:
        raise ProtocolError("truncated frame payload")
    return Frame(kind, request_id, bytes(buf[HEADER_SIZE:end]), version), end


async def read_frame(reader: asyncio.StreamReader) -> Frame:
    """Read exactly one frame from a stream; raises ProtocolError on bad data."""
    header = await reader.readexactly(HEADER_SIZE)
    magic, version, msg_type, request_id, payload_len = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    try:
        kind = MsgType(msg_type)
    except ValueError as exc:
        raise ProtocolError(f"unknown message type {msg_type}") from exc
    if payload_len > MAX_PAYLOAD:
        raise ProtocolError(f"declared payload of {payload_len} bytes exceeds cap")
    payload = await reader.readexactly(payload_len) if payload_len else b""
    return Frame(kind, request_id, payload, version)


def pack_vector(values) -> bytes:
    """Element count then float64 values, the layout of query and score payloads."""
    arr = np.ascontiguousarray(values, dtype="<f8")
    if arr.ndim != 1:
        raise ProtocolError("vector payloads are one-dimensional")
    return _U32.pack(arr.shape[0]) + arr.tobytes()


def unpack_vector(payload: bytes) -> np.ndarray:
    if len(payload) < _U32.size:
        raise ProtocolError("vector payload missing element count")
    (count,) = _U32.unpack_from(payload)
    expected = _U32.size + 8 * count
    if len(payload) != expected:
        raise ProtocolError(
            f"vector payload declares {count} floats but carries {len(payload) - _U32.size} bytes"
        )
    return np.frombuffer(payload, dtype="<f8", offset=_U32.size).astype(np.float64)


def pack_error(code: ErrorCode, message: str) -> bytes:
    return _ERR_HEAD.pack(int(code)) + message.encode("utf-8")


def unpack_error(payload: bytes) -> tuple[int, str]:
    if len(payload) < _ERR_HEAD.size:
        raise ProtocolError("error payload missing code")
    (code,) = _ERR_HEAD.unpack_from(payload)
    return code, payload[_ERR_HEAD.size :].decode("utf-8", errors="replace")
