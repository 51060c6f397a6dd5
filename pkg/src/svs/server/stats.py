"""Headcounts, occupancy and detection heatmaps over a time interval."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .records import MetadataRecord


@dataclass
class StatsReport:
    interval: tuple[float, float]
    headcount: dict[int, int] = field(default_factory=dict)
    location_headcount: dict[str, int] = field(default_factory=dict)
    occupancy: dict[str, float] = field(default_factory=dict)
    heatmap: dict[int, np.ndarray] = field(default_factory=dict)
    record_count: int = 0

    def to_dict(self) -> dict:
        return {
            "interval": list(self.interval),
            "headcount": {str(k): v for k, v in sorted(self.headcount.items())},
            "location_headcount": dict(sorted(self.location_headcount.items())),
            "occupancy": dict(sorted(self.occupancy.items())),
            "heatmap": {str(k): v.astype(int).tolist() for k, v in sorted(self.heatmap.items())},
            "record_count": self.record_count,
        }


def compute_statistics(
    records: Iterable[MetadataRecord],
    interval: tuple[float, float],
    grid: int = 16,
    frame_sizes: Mapping[int, tuple[int, int]] | None = None,
    locations: Mapping[int, str] | None = None,
    capacities: Mapping[str, float] | None = None,
) -> StatsReport:
    """Aggregate the records whose ``record_time`` lies in ``[t0, t1)``.

    Every record lands in its camera's heatmap (cell of its box center);
    headcounts are distinct global IDs.  Occupancy is reported for location
    tags with a configured capacity.
    """
    t0, t1 = interval
    if not t0 < t1:
        raise ValueError(f"interval needs t0 < t1, got [{t0}, {t1})")
    frame_sizes = frame_sizes or {}
    locations = locations or {}
    capacities = capacities or {}
    ids: dict[int, set[int]] = {}
    loc_ids: dict[str, set[int]] = {}
    heat: dict[int, np.ndarray] = {}
    n = 0
    for r in records:
        if not t0 <= r.record_time < t1:
            continue
        n += 1
        w, h = frame_sizes.get(r.camera_id, (1280, 720))
        x, y, bw, bh = r.bbox
        gx = min(max(int((x + bw / 2) / w * grid), 0), grid - 1)
        gy = min(max(int((y + bh / 2) / h * grid), 0), grid - 1)
        cell = heat.get(r.camera_id)
        if cell is None:
            cell = heat[r.camera_id] = np.zeros((grid, grid), dtype=np.int64)
        cell[gy, gx] += 1
        people = ids.setdefault(r.camera_id, set())
        tag = locations.get(r.camera_id)
        if tag is not None:
            loc_ids.setdefault(tag, set())
        if r.global_id is not None:
            people.add(r.global_id)
            if tag is not None:
                loc_ids[tag].add(r.global_id)
    location_headcount = {tag: len(s) for tag, s in loc_ids.items()}
    occupancy = {
        tag: location_headcount.get(tag, 0) / cap for tag, cap in capacities.items() if cap > 0
    }
    return StatsReport(
        interval=(t0, t1),
        headcount={cid: len(s) for cid, s in ids.items()},
        location_headcount=location_headcount,
        occupancy=occupancy,
        heatmap=heat,
        record_count=n,
    )
