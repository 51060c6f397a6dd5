from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..cloud.messages import NotificationMessage
from ..scene import FrameTruth
from ..server.records import MetadataRecord

BBox = tuple[float, float, float, float]


@dataclass
class FrameBatch:
    camera_id: int
    batch_index: int
    frames: list[FrameTruth]
    start_time: float
    end_time: float

    @property
    def last_frame_time(self) -> float:
        return self.frames[-1].timestamp


@dataclass
class Detection:
    camera_id: int
    frame_index: int
    frame_time: float
    class_id: int
    bbox: BBox
    confidence: float
    keypoints: np.ndarray | None = None
    feature: np.ndarray | None = None
    class_label: str | None = None
    truth_uid: int | None = None
    local_id: int | None = None
    anomalous: bool = False

    @property
    def is_human(self) -> bool:
        return self.class_id == 0


@dataclass
class Tracklet:
    local_id: int
    camera_id: int
    detections: list[Detection] = field(default_factory=list)
    last_seen: float = 0.0

    @property
    def last_box(self) -> BBox:
        return self.detections[-1].bbox

    def predicted_box(self, t: float) -> BBox:
        """Constant-velocity extrapolation of the last box to time ``t``."""
        last = self.detections[-1]
        if len(self.detections) < 2:
            return last.bbox
        prev = self.detections[-2]
        dt = last.frame_time - prev.frame_time
        if dt <= 0:
            return last.bbox
        ahead = (t - last.frame_time) / dt
        x, y, w, h = last.bbox
        return (
            x + (x - prev.bbox[0]) * ahead,
            y + (y - prev.bbox[1]) * ahead,
            w,
            h,
        )


@dataclass
class PoseWindow:
    camera_id: int
    window_index: int
    start_frame: int
    end_frame: int
    # local_id -> [(frame_index, keypoints (17, 3), bbox)]
    tracks: dict[int, list[tuple[int, np.ndarray, BBox]]]
    has_persons: bool
    scene_score: float | None = None

    def covers(self, frame_index: int) -> bool:
        return self.start_frame <= frame_index < self.end_frame


@dataclass
class BatchResult:
    """Everything one batch produces, independent of when it is produced."""

    camera_id: int
    batch_index: int
    start_time: float
    end_time: float
    last_frame_time: float
    frame_count: int
    person_counts: list[int]
    n_detections: int
    alerts: list[NotificationMessage]
    records: list[MetadataRecord]
    window_scores: list[tuple[int, float | None]]
    keyframe: int | None

    @property
    def detections_per_frame(self) -> float:
        return self.n_detections / self.frame_count if self.frame_count else 0.0

    def retarget(self, camera_id: int | None = None) -> "BatchResult":
        """Fresh copy (records and alerts included), optionally re-attributed to another camera."""
        cid = self.camera_id if camera_id is None else camera_id
        records = [replace(r, camera_id=cid, global_id=None) for r in self.records]
        alerts = []
        for a in self.alerts:
            body = dict(a.body)
            body["path"] = [f"ai-node:{cid}"]
            alerts.append(replace(a, camera_id=cid, body=body, publish_time=None))
        return replace(self, camera_id=cid, records=records, alerts=alerts,
                       person_counts=list(self.person_counts), window_scores=list(self.window_scores))
