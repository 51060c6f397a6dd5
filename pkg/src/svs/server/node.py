"""The server node: record intake, global IDs, confirmation, statistics and auto-reset."""

from __future__ import annotations

import bisect
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from ..cloud.messages import NotificationMessage
from ..errors import RecordRejected
from .confirm import BehaviorConfirmer
from .records import MetadataRecord
from .reid import Gallery
from .stats import StatsReport, compute_statistics

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServerConfig:
    reset_rows: int = 50_000
    reset_hours: float = 24.0
    theta: float = 0.7
    horizon: float = 600.0
    tau: float = 20.0
    confirm_run: int = 3
    grid: int = 16
    frame_sizes: Mapping[int, tuple[int, int]] = field(default_factory=dict)
    locations: Mapping[int, str] = field(default_factory=dict)
    capacities: Mapping[str, float] = field(default_factory=dict)
    audit_path: str | None = None

    @property
    def reset_seconds(self) -> float:
        return self.reset_hours * 3600.0


class Database:
    """Append-only rows with a per-camera index ordered by record time."""

    def __init__(self) -> None:
        self.rows: list[MetadataRecord] = []
        self._by_camera: dict[int, tuple[list[float], list[int]]] = {}

    def __len__(self) -> int:
        return len(self.rows)

    def insert(self, record: MetadataRecord) -> int:
        row_id = len(self.rows)
        self.rows.append(record)
        times, idx = self._by_camera.setdefault(record.camera_id, ([], []))
        if not times or record.record_time >= times[-1]:
            times.append(record.record_time)
            idx.append(row_id)
        else:
            pos = bisect.bisect_right(times, record.record_time)
            times.insert(pos, record.record_time)
            idx.insert(pos, row_id)
        return row_id

    def query(self, camera_id: int, t0: float, t1: float) -> list[MetadataRecord]:
        times, idx = self._by_camera.get(camera_id, ([], []))
        a, b = bisect.bisect_left(times, t0), bisect.bisect_left(times, t1)
        return [self.rows[i] for i in idx[a:b]]

    def between(self, t0: float, t1: float) -> list[MetadataRecord]:
        return [r for cid in sorted(self._by_camera) for r in self.query(cid, t0, t1)]

    def clear(self) -> None:
        self.rows = []
        self._by_camera = {}


@dataclass
class IngestResult:
    row_id: int
    global_id: int | None
    notification: NotificationMessage | None
    reset: dict | None


class ServerNode:
    """Single-writer store shared by every AI node.

    ``ingest`` and the read methods serialize on one lock, so a statistics
    query always sees a consistent snapshot.  Times are virtual seconds
    supplied by the caller.
    """

    def __init__(self, config: ServerConfig = ServerConfig(), start_time: float = 0.0,
                 on_notify: Callable[[NotificationMessage], None] | None = None):
        self.config = config
        self.db = Database()
        self.gallery = Gallery(config.theta, config.horizon)
        self.confirmer = BehaviorConfirmer(config.tau, config.confirm_run)
        self.on_notify = on_notify
        self.last_reset = start_time
        self.rejects = 0
        self.ingested = 0
        self.audit: list[dict] = []
        self._lock = threading.RLock()
        self._audit_file = open(config.audit_path, "a") if config.audit_path else None

    @property
    def row_count(self) -> int:
        return len(self.db)

    def _log_event(self, event: dict) -> None:
        self.audit.append(event)
        if self._audit_file is not None:
            self._audit_file.write(json.dumps(event, sort_keys=True) + "\n")
            self._audit_file.flush()

    def ingest(self, record: MetadataRecord, now: float | None = None) -> IngestResult:
        now = record.record_time if now is None else now
        with self._lock:
            try:
                record.validate()
            except RecordRejected as exc:
                self.rejects += 1
                log.debug("rejected record: %s", exc.reason)
                raise
            reset = self.maybe_reset(now)
            if record.is_human:
                record.global_id = self.gallery.assign(record.feature, record.record_time, record.camera_id)
            row_id = self.db.insert(record)
            self.ingested += 1
            note = self.confirmer.observe(record.camera_id, record.record_time, record.anomaly_score)
            if note is not None:
                note.body["global_ids"] = sorted(
                    r.global_id for r in self.db.query(record.camera_id, record.record_time, record.record_time + 1e-6)
                    if r.global_id is not None
                )
                self._log_event({
                    "event": "notification", "time": now, "camera_id": record.camera_id,
                    "origin_time": note.origin_time, "topic": note.topic,
                })
                if self.on_notify is not None:
                    self.on_notify(note)
            reset = self.maybe_reset(now) or reset
            return IngestResult(row_id, record.global_id, note, reset)

    def maybe_reset(self, now: float) -> dict | None:
        """Clear the store once it holds ``reset_rows`` rows or has run ``reset_hours``."""
        cfg = self.config
        with self._lock:
            if self.row_count >= cfg.reset_rows:
                reason = "rows"
            elif now - self.last_reset >= cfg.reset_seconds:
                reason = "uptime"
            else:
                return None
            event = {
                "event": "reset",
                "time": now,
                "reason": reason,
                "rows": self.row_count,
                "identities": len(self.gallery),
                "uptime": now - self.last_reset,
                "next_global_id": self.gallery.next_id,
            }
            self.db.clear()
            self.gallery.clear()
            self.confirmer.clear()
            self.last_reset = now
            self._log_event(event)
            log.info("reset after %d rows (%s)", event["rows"], reason)
            return event

    @property
    def resets(self) -> list[dict]:
        return [e for e in self.audit if e["event"] == "reset"]

    def next_reset_deadline(self) -> float:
        return self.last_reset + self.config.reset_seconds

    def compute_statistics(self, interval: tuple[float, float]) -> StatsReport:
        cfg = self.config
        with self._lock:
            rows = self.db.between(*interval)
        return compute_statistics(rows, interval, cfg.grid, cfg.frame_sizes, cfg.locations, cfg.capacities)

    def query(self, camera_id: int, t0: float, t1: float) -> list[MetadataRecord]:
        with self._lock:
            return self.db.query(camera_id, t0, t1)

    def close(self) -> None:
        if self._audit_file is not None:
            self._audit_file.close()
            self._audit_file = None


def load_audit(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
