"""Notification messages routed through the cloud tier."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..errors import RequestError

BEHAVIOR_TOPIC = "anomaly/behavior"
_TOPIC_RE = re.compile(r"^anomaly/(behavior|object/[A-Za-z0-9_\-]+)$")


def object_topic(class_label: str) -> str:
    return f"anomaly/object/{class_label}"


def valid_topic(topic: str) -> bool:
    return bool(_TOPIC_RE.match(topic))


@dataclass
class NotificationMessage:
    topic: str
    origin_time: float
    camera_id: int
    severity: str = "high"
    body: dict = field(default_factory=dict)
    publish_time: float | None = None

    @property
    def kind(self) -> str:
        return "behavior" if self.topic == BEHAVIOR_TOPIC else "object"

    @property
    def path(self) -> list[str]:
        return self.body.setdefault("path", [])

    def validate(self) -> None:
        if not valid_topic(self.topic):
            raise RequestError(f"invalid topic {self.topic!r}")
        if self.publish_time is not None and self.publish_time < self.origin_time:
            raise RequestError("publish_time precedes origin_time")

    def to_dict(self) -> dict:
        return {
            "topic": self.topic,
            "origin_time": self.origin_time,
            "publish_time": self.publish_time,
            "camera_id": self.camera_id,
            "severity": self.severity,
            "body": self.body,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NotificationMessage":
        return cls(
            topic=d["topic"],
            origin_time=float(d["origin_time"]),
            camera_id=int(d["camera_id"]),
            severity=d.get("severity", "high"),
            body=dict(d.get("body") or {}),
            publish_time=None if d.get("publish_time") is None else float(d["publish_time"]),
        )
