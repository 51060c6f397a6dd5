"""Request/acknowledge client with bounded retry."""

from __future__ import annotations

import asyncio
import logging
import time

from ..transport import FrameDecoder, Message, encode, parse_address

log = logging.getLogger(__name__)


def ack(ref: str, **body) -> Message:
    return Message("ack", time.time(), {"ref": ref, "ok": True, **body})


def nack(ref: str, reason: str) -> Message:
    return Message("ack", time.time(), {"ref": ref, "ok": False, "reason": reason})


class Peer:
    """One lazily (re)opened connection that sends a frame and waits for its ack.

    Each call makes up to ``attempts`` tries separated by ``backoff``
    seconds and raises :class:`ConnectionError` once they are used up.
    """

    def __init__(self, addr: str, attempts: int = 3, backoff: float = 0.2, timeout: float = 10.0):
        self.host, self.port = parse_address(addr)
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self._reader: asyncio.StreamReader | None = None
        self._writer: asyncio.StreamWriter | None = None
        self._decoder = FrameDecoder()
        self._pending: list[Message] = []
        self._lock = asyncio.Lock()

    async def _connect(self) -> None:
        if self._writer is None or self._writer.is_closing():
            self._reader, self._writer = await asyncio.open_connection(self.host, self.port)
            self._decoder = FrameDecoder()
            self._pending = []

    async def _next(self) -> Message:
        while not self._pending:
            chunk = await self._reader.read(65536)
            if not chunk:
                raise ConnectionError("peer closed the connection")
            self._pending.extend(m for m in self._decoder.feed(chunk) if isinstance(m, Message))
        return self._pending.pop(0)

    async def request(self, message: Message) -> Message:
        async with self._lock:
            last: Exception | None = None
            for attempt in range(self.attempts):
                try:
                    await self._connect()
                    self._writer.write(encode(message))
                    await self._writer.drain()
                    return await asyncio.wait_for(self._next(), self.timeout)
                except (OSError, ConnectionError, asyncio.TimeoutError) as exc:
                    last = exc
                    await self._drop()
                    if attempt + 1 < self.attempts:
                        await asyncio.sleep(self.backoff)
            raise ConnectionError(f"{self.host}:{self.port} unreachable after {self.attempts} attempts: {last}")

    async def _drop(self) -> None:
        if self._writer is not None:
            self._writer.close()
            try:
                await self._writer.wait_closed()
            except (OSError, ConnectionError):
                pass
        self._reader = self._writer = None

    async def close(self) -> None:
        async with self._lock:
            await self._drop()
