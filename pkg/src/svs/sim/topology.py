"""Discrete-event model of the whole deployment on a virtual clock.

Perception results are computed ahead of time (they do not depend on
timing); this module only decides when things happen.  Each AI node is a
source plus five stage processes joined by bounded stores, so a full
downstream store blocks the stage upstream of it.  Records travel to one
server intake queue, alerts go straight to the broker, and the server
publishes confirmed behavior notifications through the same broker.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import simpy
import simpy.rt

from ..ainode.pipeline import CostModel
from ..ainode.types import BatchResult
from ..cloud.broker import Broker, Receipt, Subscriber
from ..cloud.messages import NotificationMessage
from ..cloud.profile import LatencyProfile
from ..cloud.tables import CloudTables
from ..server.node import ServerConfig, ServerNode
from ..server.stats import compute_statistics

log = logging.getLogger(__name__)

FILE = "file"
LIVE = "live"


@dataclass(frozen=True)
class Link:
    """One-way network hop with a fixed delay and optional outage intervals."""

    delay: float
    down: tuple[tuple[float, float], ...] = ()

    def is_up(self, t: float) -> bool:
        return not any(a <= t < b for a, b in self.down)

    def next_up(self, t: float) -> float:
        while not self.is_up(t):
            t = max(b for a, b in self.down if a <= t < b)
        return t


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff: float = 0.2


@dataclass(frozen=True)
class TopologyConfig:
    cost: CostModel = CostModel()
    profile: LatencyProfile = LatencyProfile()
    server: ServerConfig = ServerConfig()
    node_count: int | None = None
    queue_capacity: int = 4
    node_to_server: Link = Link(0.005)
    node_to_cloud: Link = Link(0.030)
    server_to_cloud: Link = Link(0.030)
    server_ingest: float = 0.002
    retry: RetryPolicy = RetryPolicy()
    stats_period: float | None = 60.0
    time_scale: float | None = None


@dataclass
class BatchTrace:
    camera_id: int
    batch_index: int
    frame_count: int
    n_detections: int
    start_time: float
    last_frame_time: float
    ingest: float = 0.0
    stage_done: list[float] = field(default_factory=list)
    emit: float = 0.0
    server_arrival: float | None = None
    server_done: float | None = None
    records: int = 0

    @property
    def latency(self) -> float:
        return self.emit - self.ingest


@dataclass
class AlertTrace:
    camera_id: int
    batch_index: int
    topic: str
    origin_time: float
    handoff: float
    enqueue: float | None = None
    attempts: int = 0


@dataclass
class NotifyTrace:
    camera_id: int
    batch_index: int
    origin_time: float
    record_time: float
    server_done: float
    publish: float | None = None
    attempts: int = 0


@dataclass
class _Node:
    camera_id: int
    results: Iterable[BatchResult]
    source: str
    ingress_delay: float
    stores: list = field(default_factory=list)
    outbox: simpy.Store | None = None
    traces: list[BatchTrace] = field(default_factory=list)
    spilled: int = 0
    done: simpy.Event | None = None


class Topology:
    def __init__(self, config: TopologyConfig = TopologyConfig()):
        self.config = config
        if config.time_scale:
            self.env = simpy.rt.RealtimeEnvironment(factor=1.0 / config.time_scale, strict=False)
        else:
            self.env = simpy.Environment()
        self.server = ServerNode(config.server, start_time=0.0)
        self.tables = CloudTables(config.profile)
        self.broker: Broker | None = None
        self.subscribers: dict[str, Subscriber] = {}
        self._patterns: list[tuple[str, str]] = []
        self.nodes: list[_Node] = []
        self.alerts: list[AlertTrace] = []
        self.notifications: list[NotifyTrace] = []
        self.dead_letters: list[NotificationMessage] = []
        self._intake = simpy.Store(self.env)
        self._inflight: list[simpy.Process] = []
        self._finished = False

    # -- assembly -----------------------------------------------------------

    def add_node(self, camera_id: int, results: Iterable[BatchResult], source: str = FILE,
                 ingress_delay: float = 3.0) -> None:
        if source not in (FILE, LIVE):
            raise ValueError(f"source must be {FILE!r} or {LIVE!r}")
        self.nodes.append(_Node(camera_id, results, source, ingress_delay))

    def add_subscriber(self, endpoint: str, pattern: str = "anomaly/*") -> Subscriber:
        sub = self.subscribers.setdefault(endpoint, Subscriber(endpoint))
        self._patterns.append((pattern, endpoint))
        return sub

    @property
    def node_count(self) -> int:
        return self.config.node_count or len(self.nodes)

    # -- processes ------------------------------------------------------------

    def _send(self, link: Link, counter: list[int]):
        """Try ``link`` up to the retry budget; returns whether the hop completed."""
        retry = self.config.retry
        for attempt in range(retry.attempts):
            counter[0] += 1
            if link.is_up(self.env.now):
                yield self.env.timeout(link.delay)
                return True
            if attempt + 1 < retry.attempts:
                yield self.env.timeout(retry.backoff)
        return False

    def _source(self, node: _Node):
        env, q = self.env, node.stores[0]
        for res in node.results:
            trace = BatchTrace(res.camera_id, res.batch_index, res.frame_count, res.n_detections,
                               res.start_time, res.last_frame_time)
            if node.source == LIVE:
                ready = res.last_frame_time + node.ingress_delay
                if ready > env.now:
                    yield env.timeout(ready - env.now)
                trace.ingest = ready
            else:
                trace.ingest = env.now
            yield q.put((res, trace))
        yield q.put(None)

    def _stage(self, node: _Node, k: int):
        env = self.env
        cost, n = self.config.cost, self.node_count
        last = len(node.stores) - 1
        while True:
            item = yield node.stores[k].get()
            if item is None:
                if k < last:
                    yield node.stores[k + 1].put(None)
                else:
                    yield node.outbox.put(None)
                return
            res, trace = item
            yield env.timeout(cost.stage_time(res.detections_per_frame, n))
            trace.stage_done.append(env.now)
            if k == 0:
                for msg in res.alerts:
                    self._spawn(self._alert(msg, res))
            if k < last:
                yield node.stores[k + 1].put(item)
            else:
                trace.emit = env.now
                trace.records = len(res.records)
                node.traces.append(trace)
                yield node.outbox.put(item)

    def _uplink(self, node: _Node):
        env, link = self.env, self.config.node_to_server
        while True:
            item = yield node.outbox.get()
            if item is None:
                yield self._intake.put(None)
                return
            ok = yield from self._send(link, [0])
            if not ok:
                # spill: hold this and everything behind it until the link returns
                node.spilled += 1
                yield env.timeout(link.next_up(env.now) - env.now)
                yield env.timeout(link.delay)
            item[1].server_arrival = env.now
            yield self._intake.put(item)

    def _server(self):
        env, server = self.env, self.server
        remaining = len(self.nodes)
        while remaining:
            item = yield self._intake.get()
            if item is None:
                remaining -= 1
                continue
            res, trace = item
            yield env.timeout(self.config.server_ingest)
            now = env.now
            trace.server_done = now
            for rec in res.records:
                out = server.ingest(rec, now)
                if out.notification is not None:
                    nt = NotifyTrace(res.camera_id, res.batch_index, out.notification.origin_time,
                                     rec.record_time, now)
                    self.notifications.append(nt)
                    self._spawn(self._publish_behavior(out.notification, nt))
            if res.records:
                gids = sorted({r.global_id for r in res.records if r.global_id is not None})
                self.tables.put_item("tracking", res.camera_id, res.records[0].record_time,
                                     {"global_ids": gids, "count": len(res.records)}, now)

    def _reset_ticker(self):
        env = self.env
        while True:
            wait = self.server.next_reset_deadline() - env.now
            yield env.timeout(max(wait, 0.0))
            if self._finished:
                return
            self.server.maybe_reset(env.now)

    def _stats_pusher(self, period: float):
        """Every ``period``, summarize the rows ingested since the previous push.

        Records arrive well after their capture time, so selecting by
        ``record_time`` over the last period would mostly miss them.
        """
        env, server = self.env, self.server
        mark, epoch = 0, server.last_reset
        while True:
            yield env.timeout(period)
            if self._finished:
                return
            if server.last_reset != epoch:
                mark, epoch = 0, server.last_reset
            rows = server.db.rows[mark:]
            mark = len(server.db.rows)
            if not rows:
                continue
            times = [r.record_time for r in rows]
            cfg = server.config
            report = compute_statistics(rows, (min(times), max(times) + 1e-3), cfg.grid, cfg.frame_sizes,
                                        cfg.locations, cfg.capacities)
            for cid, count in report.headcount.items():
                self.tables.put_item("analytics", cid, env.now, {"headcount": count}, env.now)

    def _alert(self, msg: NotificationMessage, res: BatchResult):
        tr = AlertTrace(res.camera_id, res.batch_index, msg.topic, msg.origin_time, self.env.now)
        self.alerts.append(tr)
        counter = [0]
        ok = yield from self._send(self.config.node_to_cloud, counter)
        tr.attempts = counter[0]
        if not ok:
            self.dead_letters.append(msg)
            log.warning("alert from camera %d dead-lettered", res.camera_id)
            return
        tr.enqueue = self.env.now
        self._publish(msg)

    def _publish_behavior(self, msg: NotificationMessage, nt: NotifyTrace):
        counter = [0]
        ok = yield from self._send(self.config.server_to_cloud, counter)
        nt.attempts = counter[0]
        if not ok:
            self.dead_letters.append(msg)
            return
        nt.publish = self.env.now
        self._publish(msg)

    def _publish(self, msg: NotificationMessage) -> None:
        msg.path.append("cloud")
        for d in self.broker.publish(msg, self.env.now):
            self._spawn(self._deliver(d))

    def _deliver(self, d):
        yield self.env.timeout(d.deliver_at - self.env.now)
        self.broker.deliver(d, self.subscribers[d.subscription.endpoint])

    def _spawn(self, gen) -> None:
        self._inflight.append(self.env.process(gen))

    def _supervisor(self, node_done: list, server_done):
        yield simpy.AllOf(self.env, node_done)
        yield server_done
        while self._inflight:
            batch, self._inflight = self._inflight, []
            yield simpy.AllOf(self.env, batch)
        self._finished = True

    # -- run ------------------------------------------------------------------

    def run(self) -> "Topology":
        env, cfg = self.env, self.config
        self.broker = Broker(cfg.profile, self.node_count)
        for pattern, endpoint in self._patterns:
            self.broker.subscribe(pattern, endpoint)
        done = []
        for node in self.nodes:
            node.stores = [simpy.Store(env, capacity=cfg.queue_capacity) for _ in cfg.cost.stages]
            node.outbox = simpy.Store(env)
            done.append(env.process(self._source(node)))
            for k in range(len(node.stores)):
                p = env.process(self._stage(node, k))
            done.append(p)
            env.process(self._uplink(node))
        server = env.process(self._server())
        env.process(self._reset_ticker())
        if cfg.stats_period:
            env.process(self._stats_pusher(cfg.stats_period))
        env.run(until=env.process(self._supervisor(done, server)))
        return self

    # -- views ----------------------------------------------------------------

    def batch_traces(self) -> Iterator[BatchTrace]:
        for node in self.nodes:
            yield from node.traces

    def receipts(self) -> list[Receipt]:
        out = [r for s in self.subscribers.values() for r in s.receipts]
        out.sort(key=lambda r: (r.receipt_time, r.subscriber))
        return out
