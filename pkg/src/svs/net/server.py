"""Server tier behind a socket."""

from __future__ import annotations

import asyncio
import logging
import time

from ..cloud.messages import NotificationMessage
from ..errors import RecordRejected
from ..server.node import ServerConfig, ServerNode
from ..server.records import MetadataRecord
from ..server.stats import compute_statistics
from ..transport import Message, encode, parse_address, read_messages
from .client import Peer, ack, nack

log = logging.getLogger(__name__)


class ServerService:
    """Serializes every connected AI node's records into one :class:`ServerNode`."""

    def __init__(self, config: ServerConfig = ServerConfig(), cloud: str | None = None,
                 stats_period: float | None = 60.0, tick: float = 1.0):
        self.node = ServerNode(config, start_time=time.time())
        self.cloud = Peer(cloud) if cloud else None
        self.stats_period = stats_period
        self.tick = tick
        self.dead_letters: list[NotificationMessage] = []
        self._intake: asyncio.Queue = asyncio.Queue()
        self._tasks: list[asyncio.Task] = []

    async def _forward(self, note: NotificationMessage) -> None:
        if self.cloud is None:
            return
        note.publish_time = max(time.time(), note.origin_time)
        try:
            await self.cloud.request(Message("behavior_alert", time.time(), note.to_dict()))
        except ConnectionError as exc:
            self.dead_letters.append(note)
            log.error("behavior notification dead-lettered: %s", exc)

    def _ingest(self, body: dict) -> Message:
        now = time.time()
        gids, rejected = [], []
        for raw in body.get("records", []):
            try:
                out = self.node.ingest(MetadataRecord.from_dict(raw), now)
            except RecordRejected as exc:
                rejected.append(exc.reason)
                continue
            gids.append(out.global_id)
            if out.notification is not None:
                self._tasks.append(asyncio.create_task(self._forward(out.notification)))
        return ack("record", global_ids=gids, rejected=rejected, rows=self.node.row_count)

    async def _worker(self) -> None:
        while True:
            body, fut = await self._intake.get()
            fut.set_result(self._ingest(body))

    async def _ticker(self) -> None:
        node = self.node
        last_stats, mark, epoch = time.time(), 0, node.last_reset
        while True:
            await asyncio.sleep(self.tick)
            now = time.time()
            node.maybe_reset(now)
            if not (self.stats_period and self.cloud is not None and now - last_stats >= self.stats_period):
                continue
            # rows ingested since the last push; record times lag the wall clock
            with node._lock:
                if node.last_reset != epoch:
                    mark, epoch = 0, node.last_reset
                rows = node.db.rows[mark:]
                mark = len(node.db.rows)
            last_stats = now
            if not rows:
                continue
            times = [r.record_time for r in rows]
            cfg = node.config
            report = compute_statistics(rows, (min(times), max(times) + 1e-3), cfg.grid, cfg.frame_sizes,
                                        cfg.locations, cfg.capacities)
            body = {"t0": report.interval[0], "t1": report.interval[1],
                    "headcount": {str(k): v for k, v in report.headcount.items()}}
            try:
                await self.cloud.request(Message("stats", now, body))
            except ConnectionError as exc:
                log.warning("stats push failed: %s", exc)

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            async for msg in read_messages(reader):
                if msg.type == "record":
                    fut = asyncio.get_running_loop().create_future()
                    await self._intake.put((msg.body, fut))
                    reply = await fut
                elif msg.type == "stats":
                    try:
                        reply = ack("stats", **self.node.compute_statistics(
                            (float(msg.body["t0"]), float(msg.body["t1"]))).to_dict())
                    except (KeyError, ValueError) as exc:
                        reply = nack("stats", str(exc))
                else:
                    reply = nack(msg.type, f"server does not handle {msg.type!r}")
                writer.write(encode(reply))
                await writer.drain()
        except (OSError, ConnectionError) as exc:
            log.info("connection closed: %s", exc)
        finally:
            writer.close()

    async def serve(self, listen: str) -> asyncio.AbstractServer:
        self._tasks += [asyncio.create_task(self._worker()), asyncio.create_task(self._ticker())]
        host, port = parse_address(listen)
        return await asyncio.start_server(self.handle, host, port)

    async def close(self) -> None:
        for t in self._tasks:
            t.cancel()
        if self.cloud is not None:
            await self.cloud.close()
        self.node.close()
