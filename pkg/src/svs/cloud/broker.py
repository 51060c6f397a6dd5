"""Topic-routed notification broker with injected fanout latency."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..errors import RequestError, SubscriptionRejected
from .messages import NotificationMessage
from .profile import LatencyProfile

log = logging.getLogger(__name__)

MAX_ENDPOINTS = 50


def parse_pattern(pattern: str) -> tuple[str, ...]:
    """Split a pattern into literal segments; a trailing ``*`` matches one or more segments."""
    parts = tuple(pattern.split("/"))
    if not pattern or any(not p for p in parts):
        raise SubscriptionRejected(f"malformed pattern {pattern!r}")
    if any("*" in p for p in parts[:-1]) or ("*" in parts[-1] and parts[-1] != "*"):
        raise SubscriptionRejected(f"wildcard must be a whole trailing segment: {pattern!r}")
    return parts


def topic_matches(pattern: str | tuple[str, ...], topic: str) -> bool:
    parts = parse_pattern(pattern) if isinstance(pattern, str) else pattern
    segs = topic.split("/")
    if parts[-1] == "*":
        head = parts[:-1]
        return len(segs) > len(head) and tuple(segs[: len(head)]) == head
    return tuple(segs) == parts


@dataclass
class Receipt:
    subscriber: str
    topic: str
    origin_time: float
    publish_time: float
    receipt_time: float
    camera_id: int
    path: list[str]

    @property
    def latency(self) -> float:
        return self.receipt_time - self.origin_time


@dataclass
class Subscriber:
    """An endpoint that stamps and keeps every message it receives."""

    endpoint: str
    receipts: list[Receipt] = field(default_factory=list)
    connected: bool = True

    def receive(self, message: NotificationMessage, receipt_time: float) -> Receipt:
        if not self.connected:
            raise ConnectionError(f"endpoint {self.endpoint} is disconnected")
        r = Receipt(
            subscriber=self.endpoint,
            topic=message.topic,
            origin_time=message.origin_time,
            publish_time=message.publish_time if message.publish_time is not None else receipt_time,
            receipt_time=receipt_time,
            camera_id=message.camera_id,
            path=list(message.body.get("path", [])),
        )
        self.receipts.append(r)
        return r

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["topic", "origin_time", "receipt_time"])
            for r in self.receipts:
                w.writerow([r.topic, f"{r.origin_time:.6f}", f"{r.receipt_time:.6f}"])


@dataclass
class Subscription:
    sub_id: int
    pattern: str
    endpoint: str
    parts: tuple[str, ...]
    active: bool = True


@dataclass
class Delivery:
    subscription: Subscription
    message: NotificationMessage
    deliver_at: float


class Broker:
    """Routes each publish to every matching live subscription.

    :meth:`publish` is time-explicit: it returns the deliveries with their
    due times and leaves scheduling to the caller, so the same broker runs
    inside a discrete-event loop or behind a socket.  Per (topic, endpoint)
    delivery order follows publish order.
    """

    def __init__(self, profile: LatencyProfile = LatencyProfile(), node_count: int = 4,
                 max_endpoints: int = MAX_ENDPOINTS):
        self.profile = profile
        self.node_count = node_count
        self.max_endpoints = max_endpoints
        self.subscriptions: dict[int, Subscription] = {}
        self.unrouted = 0
        self.published = 0
        self.delivered = 0
        self.failed = 0
        self._next_sub = 1
        self._last_due: dict[tuple[str, str], float] = {}

    @property
    def fanout_delay(self) -> float:
        return self.profile.fanout(self.node_count)

    def endpoints(self) -> set[str]:
        return {s.endpoint for s in self.subscriptions.values() if s.active}

    def subscribe(self, pattern: str, endpoint: str) -> Subscription:
        parts = parse_pattern(pattern)
        if endpoint not in self.endpoints() and len(self.endpoints()) >= self.max_endpoints:
            raise SubscriptionRejected(f"endpoint cap {self.max_endpoints} reached")
        sub = Subscription(self._next_sub, pattern, endpoint, parts)
        self._next_sub += 1
        self.subscriptions[sub.sub_id] = sub
        return sub

    def unsubscribe(self, sub: Subscription | int) -> None:
        sid = sub if isinstance(sub, int) else sub.sub_id
        s = self.subscriptions.pop(sid, None)
        if s is not None:
            s.active = False

    def publish(self, message: NotificationMessage, now: float) -> list[Delivery]:
        message.validate()
        if message.publish_time is None:
            message.publish_time = max(now, message.origin_time)
        if message.publish_time < message.origin_time:
            raise RequestError("publish_time precedes origin_time")
        self.published += 1
        deliveries = []
        seen: set[str] = set()
        for sub in self.subscriptions.values():
            if not sub.active or sub.endpoint in seen or not topic_matches(sub.parts, message.topic):
                continue
            seen.add(sub.endpoint)
            key = (message.topic, sub.endpoint)
            due = max(now + self.fanout_delay, self._last_due.get(key, float("-inf")))
            self._last_due[key] = due
            deliveries.append(Delivery(sub, message, due))
        if not deliveries:
            self.unrouted += 1
        return deliveries

    def deliver(self, delivery: Delivery, subscriber: Subscriber | Callable[[NotificationMessage, float], object]):
        """Hand a due delivery to its endpoint; a failing endpoint does not affect others."""
        try:
            if isinstance(subscriber, Subscriber):
                out = subscriber.receive(delivery.message, delivery.deliver_at)
            else:
                out = subscriber(delivery.message, delivery.deliver_at)
        except Exception as exc:
            self.failed += 1
            log.warning("delivery to %s failed: %s", delivery.subscription.endpoint, exc)
            return None
        self.delivered += 1
        return out
