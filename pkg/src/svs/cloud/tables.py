"""The two cloud table families, keyed by (camera_id, timestamp)."""

from __future__ import annotations

import bisect
import threading
from typing import Any

from ..errors import RequestError
from .profile import LatencyProfile

TABLES = ("tracking", "analytics")


class CloudTables:
    """Emulated low-latency key-value tables.

    Every call takes the virtual request time ``now`` and returns the virtual
    time its response is ready.  A put becomes visible once its
    acknowledgment delay has elapsed.
    """

    def __init__(self, profile: LatencyProfile = LatencyProfile()):
        self.profile = profile
        self._rows: dict[str, dict[tuple[int, float], tuple[float, Any]]] = {t: {} for t in TABLES}
        self._index: dict[tuple[str, int], list[float]] = {}
        self._lock = threading.Lock()

    def _table(self, table: str) -> dict:
        try:
            return self._rows[table]
        except KeyError:
            raise RequestError(f"unknown table {table!r}") from None

    def put_item(self, table: str, camera_id: int, timestamp: float, value: Any, now: float = 0.0) -> float:
        rows = self._table(table)
        ack = now + self.profile.table_put / 1000.0
        key = (int(camera_id), float(timestamp))
        with self._lock:
            if key not in rows:
                bisect.insort(self._index.setdefault((table, key[0]), []), key[1])
            rows[key] = (ack, value)
        return ack

    def get_item(self, table: str, camera_id: int, timestamp: float, now: float = 0.0) -> tuple[Any | None, float]:
        rows = self._table(table)
        with self._lock:
            hit = rows.get((int(camera_id), float(timestamp)))
        value = hit[1] if hit is not None and hit[0] <= now else None
        return value, now + self.profile.table_get / 1000.0

    def query_stats(self, camera_id: int, t0: float, t1: float, now: float = 0.0) -> tuple[list[dict], float]:
        """Analytics rows with ``t0 <= timestamp < t1`` in ascending order."""
        if t1 < t0:
            raise RequestError(f"inverted range [{t0}, {t1})")
        rows = self._rows["analytics"]
        with self._lock:
            times = self._index.get(("analytics", int(camera_id)), [])
            a, b = bisect.bisect_left(times, t0), bisect.bisect_left(times, t1)
            out = []
            for ts in times[a:b]:
                visible, value = rows[(int(camera_id), ts)]
                if visible <= now:
                    out.append({"camera_id": int(camera_id), "timestamp": ts, "value": value})
        return out, now + self.profile.api_statistical / 1000.0
