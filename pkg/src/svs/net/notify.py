"""A subscriber endpoint that logs every notification it receives."""

from __future__ import annotations

import asyncio
import csv
import time
from pathlib import Path

from ..errors import SubscriptionRejected
from ..transport import FrameDecoder, Message, encode, parse_address


async def run_subscriber(
    connect: str,
    pattern: str = "anomaly/*",
    log_path: str | Path | None = None,
    endpoint: str | None = None,
    count: int | None = None,
    timeout: float | None = None,
    ready: asyncio.Event | None = None,
) -> list[tuple[str, float, float]]:
    """Subscribe and record ``(topic, origin_time, receipt_time)`` rows.

    Stops after ``count`` messages, after ``timeout`` seconds, or when the
    cloud closes the connection.
    """
    host, port = parse_address(connect)
    reader, writer = await asyncio.open_connection(host, port)
    body = {"pattern": pattern}
    if endpoint:
        body["endpoint"] = endpoint
    writer.write(encode(Message("subscribe", time.time(), body)))
    await writer.drain()
    decoder = FrameDecoder()
    rows: list[tuple[str, float, float]] = []
    fh = open(log_path, "w", newline="") if log_path else None
    out = csv.writer(fh) if fh else None
    if out:
        out.writerow(["topic", "origin_time", "receipt_time"])
    deadline = None if timeout is None else time.monotonic() + timeout
    try:
        while count is None or len(rows) < count:
            wait = None if deadline is None else deadline - time.monotonic()
            if wait is not None and wait <= 0:
                break
            try:
                chunk = await asyncio.wait_for(reader.read(65536), wait)
            except asyncio.TimeoutError:
                break
            if not chunk:
                break
            received = time.time()
            for m in decoder.feed(chunk):
                if not isinstance(m, Message):
                    continue
                if m.type == "ack":
                    if m.body.get("ref") == "subscribe":
                        if not m.body.get("ok"):
                            raise SubscriptionRejected(m.body.get("reason", "rejected"))
                        if ready is not None:
                            ready.set()
                    continue
                row = (m.body["topic"], float(m.body["origin_time"]), received)
                rows.append(row)
                if out:
                    out.writerow([row[0], f"{row[1]:.6f}", f"{row[2]:.6f}"])
                    fh.flush()
    finally:
        writer.close()
        if fh:
            fh.close()
    return rows
