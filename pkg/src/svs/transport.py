"""Length-prefixed JSON framing used between every pair of tiers.

Each frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
payload.  Payloads are serialized with sorted keys and compact separators
so identical messages always produce identical bytes.
"""

from __future__ import annotations

import asyncio
import json
import struct
from dataclasses import dataclass, field
from typing import Any, AsyncIterator, Iterable, Mapping

from .errors import EncodeError, FrameTooLarge

MAX_PAYLOAD = 16 * 1024 * 1024
HEADER = struct.Struct(">I")

MESSAGE_TYPES = frozenset(
    {"record", "object_alert", "behavior_alert", "put", "get", "query", "subscribe", "ack", "stats"}
)


@dataclass
class Message:
    type: str
    ts: float
    body: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"type": self.type, "ts": self.ts, "body": self.body}


@dataclass
class FrameError:
    """A single bad frame; the decoder has already skipped past it."""

    offset: int
    reason: str


def canonical_json(obj: Any) -> bytes:
    try:
        text = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    except (TypeError, ValueError) as exc:
        raise EncodeError(f"payload not serializable: {exc}") from exc
    return text.encode("utf-8")


def encode_frame(payload: Mapping) -> bytes:
    data = canonical_json(payload)
    if len(data) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(data)} bytes exceeds {MAX_PAYLOAD}")
    return HEADER.pack(len(data)) + data


def encode(message: Message) -> bytes:
    if message.type not in MESSAGE_TYPES:
        raise EncodeError(f"unknown message type {message.type!r}")
    return encode_frame(message.to_dict())


def _parse(payload: bytes) -> Message:
    obj = json.loads(payload.decode("utf-8"))
    if not isinstance(obj, dict):
        raise ValueError("payload is not a JSON object")
    missing = {"type", "ts", "body"} - obj.keys()
    if missing:
        raise ValueError(f"missing fields {sorted(missing)}")
    mtype, ts, body = obj["type"], obj["ts"], obj["body"]
    if mtype not in MESSAGE_TYPES:
        raise ValueError(f"unknown message type {mtype!r}")
    if isinstance(ts, bool) or not isinstance(ts, (int, float)):
        raise ValueError("ts is not a number")
    if not isinstance(body, dict):
        raise ValueError("body is not an object")
    return Message(mtype, ts, body)


class FrameDecoder:
    """Incremental decoder; feed arbitrary chunks, get whole messages back.

    A frame whose payload is not valid JSON, or does not carry the mandatory
    fields, yields a :class:`FrameError` and decoding resumes at the next
    length boundary.  A declared length above the cap raises
    :class:`FrameTooLarge` because the stream can no longer be trusted.
    """

    def __init__(self, max_payload: int = MAX_PAYLOAD):
        self.max_payload = max_payload
        self._buf = bytearray()
        self._consumed = 0

    @property
    def pending(self) -> int:
        return len(self._buf)

    def feed(self, data: bytes) -> list[Message | FrameError]:
        self._buf.extend(data)
        out: list[Message | FrameError] = []
        while len(self._buf) >= HEADER.size:
            (length,) = HEADER.unpack_from(self._buf)
            if length > self.max_payload:
                raise FrameTooLarge(f"declared frame length {length} exceeds {self.max_payload}")
            end = HEADER.size + length
            if len(self._buf) < end:
                break
            payload = bytes(self._buf[HEADER.size:end])
            offset = self._consumed
            del self._buf[:end]
            self._consumed += end
            try:
                out.append(_parse(payload))
            except (ValueError, UnicodeDecodeError) as exc:
                out.append(FrameError(offset, str(exc)))
        return out


def decode(chunks: Iterable[bytes]) -> list[Message | FrameError]:
    decoder = FrameDecoder()
    out: list[Message | FrameError] = []
    for chunk in chunks:
        out.extend(decoder.feed(chunk))
    return out


def parse_address(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must be host:port, got {addr!r}")
    return host or "127.0.0.1", int(port)


async def read_messages(reader: asyncio.StreamReader) -> AsyncIterator[Message]:
    """Yield messages from a stream until EOF, skipping bad frames."""
    decoder = FrameDecoder()
    while True:
        chunk = await reader.read(65536)
        if not chunk:
            return
        for item in decoder.feed(chunk):
            if isinstance(item, Message):
                yield item


async def send(writer: asyncio.StreamWriter, message: Message) -> None:
    writer.write(encode(message))
    await writer.drain()
