"""The server database row, one per detection in a keyframe."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from ..errors import RecordRejected

SCORE_CEILING = 40.0
HUMAN_CLASS = 0


@dataclass
class MetadataRecord:
    record_time: float
    camera_id: int
    class_id: int
    bbox: tuple[float, float, float, float]
    feature: np.ndarray | None = None
    local_id: int | None = None
    global_id: int | None = None
    anomaly_score: float | None = None

    def __post_init__(self) -> None:
        # stored with millisecond precision
        self.record_time = round(float(self.record_time), 3)
        self.bbox = tuple(float(v) for v in self.bbox)

    @property
    def is_human(self) -> bool:
        return self.class_id == HUMAN_CLASS

    def validate(self) -> None:
        if not isinstance(self.camera_id, int) or self.camera_id < 1:
            raise RecordRejected(f"bad camera_id {self.camera_id!r}")
        if not isinstance(self.class_id, int) or self.class_id < 0:
            raise RecordRejected(f"bad class_id {self.class_id!r}")
        if len(self.bbox) != 4 or not all(math.isfinite(v) for v in self.bbox):
            raise RecordRejected("bbox must be four finite numbers")
        if self.bbox[2] <= 0 or self.bbox[3] <= 0:
            raise RecordRejected("bbox width and height must be positive")
        if self.anomaly_score is not None:
            if math.isnan(self.anomaly_score) or self.anomaly_score > SCORE_CEILING:
                raise RecordRejected(f"anomaly_score {self.anomaly_score} exceeds {SCORE_CEILING}")
        if self.is_human:
            if self.feature is None:
                raise RecordRejected("human record without feature")
            if not np.all(np.isfinite(self.feature)):
                raise RecordRejected("feature contains non-finite values")
            if not np.linalg.norm(self.feature) > 0:
                raise RecordRejected("zero-norm feature")
        elif self.feature is not None:
            raise RecordRejected("non-human record carries a feature")

    def to_dict(self) -> dict:
        return {
            "record_time": self.record_time,
            "camera_id": self.camera_id,
            "class_id": self.class_id,
            "bbox": list(self.bbox),
            "feature": None if self.feature is None else [float(v) for v in self.feature],
            "local_id": self.local_id,
            "global_id": self.global_id,
            "anomaly_score": self.anomaly_score,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MetadataRecord":
        try:
            feature = d.get("feature")
            return cls(
                record_time=d["record_time"],
                camera_id=d["camera_id"],
                class_id=d["class_id"],
                bbox=tuple(d["bbox"]),
                feature=None if feature is None else np.asarray(feature, dtype=float),
                local_id=d.get("local_id"),
                global_id=d.get("global_id"),
                anomaly_score=d.get("anomaly_score"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordRejected(f"malformed record: {exc}") from exc

    def same_as(self, other: "MetadataRecord") -> bool:
        if (self.feature is None) != (other.feature is None):
            return False
        if self.feature is not None and not np.array_equal(self.feature, other.feature):
            return False
        a, b = self.to_dict(), other.to_dict()
        a.pop("feature"), b.pop("feature")
        return a == b
