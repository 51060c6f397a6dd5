"""Cloud tier behind a socket: broker fanout and the two tables."""

from __future__ import annotations

import asyncio
import itertools
import logging
import time

from ..cloud.broker import Broker
from ..cloud.messages import NotificationMessage
from ..cloud.profile import LatencyProfile
from ..cloud.tables import CloudTables
from ..errors import RequestError, SubscriptionRejected
from ..transport import Message, encode, parse_address, read_messages
from .client import ack, nack

log = logging.getLogger(__name__)

ALERT_TYPES = ("object_alert", "behavior_alert")


class CloudService:
    def __init__(self, profile: LatencyProfile = LatencyProfile(), node_count: int = 4, max_endpoints: int = 50):
        self.profile = profile
        self.broker = Broker(profile, node_count, max_endpoints)
        self.tables = CloudTables(profile)
        self._outboxes: dict[str, asyncio.Queue] = {}
        self._anon = itertools.count(1)

    async def _sender(self, endpoint: str, writer: asyncio.StreamWriter, queue: asyncio.Queue) -> None:
        while True:
            due, frame = await queue.get()
            delay = due - time.time()
            if delay > 0:
                await asyncio.sleep(delay)
            try:
                writer.write(frame)
                await writer.drain()
                self.broker.delivered += 1
            except (OSError, ConnectionError) as exc:
                self.broker.failed += 1
                log.warning("subscriber %s dropped: %s", endpoint, exc)
                return

    def _route(self, note: NotificationMessage, mtype: str) -> int:
        deliveries = self.broker.publish(note, time.time())
        frame = None
        for d in deliveries:
            box = self._outboxes.get(d.subscription.endpoint)
            if box is None:
                continue
            if frame is None:
                note.path.append("cloud")
                frame = encode(Message(mtype, note.publish_time, note.to_dict()))
            box.put_nowait((d.deliver_at, frame))
        return len(deliveries)

    async def _dispatch(self, msg: Message, writer, subs: list, tasks: list) -> Message:
        body = msg.body
        t = msg.type
        if t == "subscribe":
            endpoint = str(body.get("endpoint") or f"endpoint-{next(self._anon)}")
            sub = self.broker.subscribe(str(body["pattern"]), endpoint)
            subs.append(sub)
            if endpoint not in self._outboxes:
                q: asyncio.Queue = asyncio.Queue()
                self._outboxes[endpoint] = q
                tasks.append(asyncio.create_task(self._sender(endpoint, writer, q)))
            return ack(t, sub_id=sub.sub_id, endpoint=endpoint)
        if t in ALERT_TYPES:
            note = NotificationMessage.from_dict(body)
            return ack(t, routed=self._route(note, t))
        if t == "put":
            ready = self.tables.put_item(body["table"], body["camera_id"], body["timestamp"], body.get("value"), time.time())
            await asyncio.sleep(max(0.0, ready - time.time()))
            return ack(t)
        if t == "get":
            value, ready = self.tables.get_item(body["table"], body["camera_id"], body["timestamp"], time.time())
            await asyncio.sleep(max(0.0, ready - time.time()))
            return ack(t, value=value, found=value is not None)
        if t == "query":
            rows, ready = self.tables.query_stats(body["camera_id"], body["t0"], body["t1"], time.time())
            await asyncio.sleep(max(0.0, ready - time.time()))
            return ack(t, rows=rows)
        if t == "stats":
            now = time.time()
            for cid, count in body.get("headcount", {}).items():
                self.tables.put_item("analytics", int(cid), float(body.get("t1", now)), {"headcount": count}, now)
            return ack(t)
        raise RequestError(f"cloud does not handle {t!r}")

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        subs: list = []
        tasks: list[asyncio.Task] = []
        try:
            async for msg in read_messages(reader):
                try:
                    reply = await self._dispatch(msg, writer, subs, tasks)
                except (RequestError, SubscriptionRejected, KeyError, TypeError, ValueError) as exc:
                    reply = nack(msg.type, str(exc))
                writer.write(encode(reply))
                await writer.drain()
        except (OSError, ConnectionError) as exc:
            log.info("connection closed: %s", exc)
        finally:
            for sub in subs:
                self.broker.unsubscribe(sub)
                if sub.endpoint not in self.broker.endpoints():
                    self._outboxes.pop(sub.endpoint, None)
            for task in tasks:
                task.cancel()
            writer.close()

    async def serve(self, listen: str) -> asyncio.AbstractServer:
        host, port = parse_address(listen)
        return await asyncio.start_server(self.handle, host, port)
