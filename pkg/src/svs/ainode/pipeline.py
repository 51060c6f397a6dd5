"""Per-camera perception pipeline: batch in, alerts and keyframe records out.

Stage order per batch: detection (object anomalies leave here on the fast
path), tracking, pose windows and behavior scoring, keyframe selection,
feature extraction on the keyframe, record emission.  This module decides
*what* a batch produces; :mod:`svs.sim` decides *when*.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from ..cloud.messages import NotificationMessage, object_topic
from ..errors import StageError
from ..scene import Scenario
from ..server.records import SCORE_CEILING, MetadataRecord
from .batching import Batcher
from .stages import (
    BehaviorScorer,
    Detector,
    FeatureExtractor,
    TruthDetector,
    TruthExtractor,
    VarianceScorer,
    detect_objects,
    extract_features,
    score_behavior,
)
from .tracker import IoUTracker, TrackerConfig
from .types import BatchResult, Detection, FrameBatch, PoseWindow
from .windows import WindowBuilder

log = logging.getLogger(__name__)

# GPU memory per pipeline caps one 4-GPU server at this many pipelines.
MAX_PIPELINES = 16


@dataclass(frozen=True)
class PipelineConfig:
    batch_size: int = 30
    window: int = 30
    stride: int = 20
    tracker: TrackerConfig = TrackerConfig()
    anomaly_classes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CostModel:
    """Synthetic stage compute time in virtual milliseconds.

    Each of the five stages costs ``base_ms + per_detection_ms * n`` per batch,
    with ``n`` the batch's mean detections per frame, multiplied by
    ``1 + contention * (node_count - 1)`` for pipelines sharing the host.
    """

    base_ms: float = 50.0
    per_detection_ms: float = 20.0
    contention: float = 0.5
    stages: tuple[str, ...] = ("detect", "track", "pose", "score", "extract")

    def multiplier(self, node_count: int) -> float:
        return 1.0 + self.contention * (max(node_count, 1) - 1)

    def stage_time(self, detections_per_frame: float, node_count: int = 1) -> float:
        return self.multiplier(node_count) * (self.base_ms + self.per_detection_ms * detections_per_frame) / 1000.0

    def batch_time(self, detections_per_frame: float, node_count: int = 1) -> float:
        return len(self.stages) * self.stage_time(detections_per_frame, node_count)


def select_keyframe(
    person_counts: Sequence[int],
    frame_scores: Sequence[float | None],
    detection_counts: Sequence[int] | None = None,
) -> int | None:
    """Most persons, then lowest scene score, then earliest frame.

    Frames without a score rank as if scored at the 40 ceiling.  A batch in
    which no frame has any detection yields ``None``.
    """
    totals = detection_counts if detection_counts is not None else person_counts
    if not any(totals):
        return None
    # no persons anywhere: fall back to the frame with the most objects
    counts = person_counts if any(person_counts) else totals
    best = None
    best_key = None
    for i, count in enumerate(counts):
        score = frame_scores[i]
        key = (-count, SCORE_CEILING if score is None else score, i)
        if best_key is None or key < best_key:
            best, best_key = i, key
    return best


def flag_object_anomaly(detection: Detection) -> NotificationMessage:
    return NotificationMessage(
        topic=object_topic(detection.class_label or str(detection.class_id)),
        origin_time=detection.frame_time,
        camera_id=detection.camera_id,
        severity="critical",
        body={
            "class_id": detection.class_id,
            "class_label": detection.class_label,
            "bbox": list(detection.bbox),
            "confidence": detection.confidence,
            "frame_index": detection.frame_index,
            "path": [f"ai-node:{detection.camera_id}"],
        },
    )


def object_alerts(per_frame: Sequence[Sequence[Detection]]) -> list[NotificationMessage]:
    """One alert per (camera, class) per batch, stamped with its first sighting."""
    first: dict[tuple[int, int], Detection] = {}
    for dets in per_frame:
        for d in dets:
            if d.anomalous:
                first.setdefault((d.camera_id, d.class_id), d)
    return [flag_object_anomaly(d) for d in first.values()]


def emit_records(detections: Sequence[Detection], scene_score: float | None) -> list[MetadataRecord]:
    return [
        MetadataRecord(
            record_time=d.frame_time,
            camera_id=d.camera_id,
            class_id=d.class_id,
            bbox=d.bbox,
            feature=d.feature if d.is_human else None,
            local_id=d.local_id,
            anomaly_score=scene_score,
        )
        for d in detections
    ]


class Pipeline:
    """Stateful perception for one camera session."""

    def __init__(
        self,
        camera_id: int,
        detector: Detector,
        extractor: FeatureExtractor,
        scorer: BehaviorScorer | None = None,
        config: PipelineConfig = PipelineConfig(),
    ):
        self.camera_id = camera_id
        self.config = config
        self.detector = detector
        self.extractor = extractor
        self.scorer = scorer or VarianceScorer()
        self.tracker = IoUTracker(camera_id, config.tracker)
        self.windows = WindowBuilder(camera_id, config.window, config.stride)
        self.dropped = 0
        self.processed = 0

    def process(self, batch: FrameBatch) -> BatchResult | None:
        """Run every stage on ``batch``; returns ``None`` if a stage failed (batch dropped)."""
        try:
            return self._process(batch)
        except StageError as exc:
            self.dropped += 1
            log.warning("dropping batch: %s", exc)
            return None

    def _process(self, batch: FrameBatch) -> BatchResult:
        per_frame = detect_objects(batch, self.detector)
        alerts = object_alerts(per_frame)

        completed: list[PoseWindow] = []
        for frame, dets in zip(batch.frames, per_frame):
            humans = [d for d in dets if d.is_human]
            self.tracker.update(humans, frame.timestamp)
            poses = [(d.local_id, d.keypoints, d.bbox) for d in humans if d.keypoints is not None]
            completed.extend(self.windows.push(frame.frame_index, poses))
        for w in completed:
            score_behavior(w, self.scorer)

        frame_scores: list[float | None] = []
        for frame in batch.frames:
            covering = [w.scene_score for w in completed if w.covers(frame.frame_index) and w.scene_score is not None]
            frame_scores.append(min(covering) if covering else None)
        person_counts = [sum(1 for d in dets if d.is_human) for dets in per_frame]
        det_counts = [len(dets) for dets in per_frame]
        key = select_keyframe(person_counts, frame_scores, det_counts)

        records: list[MetadataRecord] = []
        if key is not None:
            chosen = extract_features(per_frame[key], self.extractor)
            records = emit_records(chosen, frame_scores[key])
        self.processed += 1
        return BatchResult(
            camera_id=batch.camera_id,
            batch_index=batch.batch_index,
            start_time=batch.start_time,
            end_time=batch.end_time,
            last_frame_time=batch.last_frame_time,
            frame_count=len(batch.frames),
            person_counts=person_counts,
            n_detections=sum(det_counts),
            alerts=alerts,
            records=records,
            window_scores=[(w.window_index, w.scene_score) for w in completed],
            keyframe=key,
        )


def reference_pipeline(scenario: Scenario, camera_id: int, config: PipelineConfig | None = None) -> Pipeline:
    cfg = scenario.config
    cam = scenario.camera(camera_id)
    classes = dict(cfg.anomaly_classes)
    config = config or PipelineConfig(anomaly_classes=classes)
    detector = TruthDetector(
        cfg.detector_noise,
        seed=cfg.seed,
        anomaly_class_ids={v: k for k, v in classes.items()},
        frame_size=(cam.width, cam.height),
    )
    extractor = TruthExtractor(scenario.feature, sigma=cfg.detector_noise.feature_sigma, seed=cfg.seed)
    return Pipeline(camera_id, detector, extractor, VarianceScorer(), config)


def run_camera(scenario: Scenario, camera_id: int, pipeline: Pipeline | None = None) -> Iterator[BatchResult]:
    """Stream one camera's frames through a pipeline, yielding each batch result."""
    pipeline = pipeline or reference_pipeline(scenario, camera_id)
    cam = scenario.camera(camera_id)
    batcher = Batcher(camera_id, pipeline.config.batch_size, cam.fps)
    for frame in scenario.frames(camera_id):
        batch = batcher.push(frame)
        if batch is None:
            continue
        result = pipeline.process(batch)
        if result is not None:
            yield result


class GroundTruthSummarizer:
    """Batch-granular stand-in for :class:`Pipeline` used for multi-day runs.

    Skips per-frame perception: the keyframe is the batch's first frame, its
    persons come straight from the scenario, local IDs are per-visit, and
    every record carries the no-anomaly score.  Per-frame detections are
    taken as constant across the batch.
    """

    def __init__(self, scenario: Scenario, camera_id: int, batch_size: int = 30):
        self.scenario = scenario
        self.camera_id = camera_id
        self.batch_size = batch_size
        self._local_ids: dict[tuple[int, float], int] = {}

    def __iter__(self) -> Iterator[BatchResult]:
        sc = self.scenario
        cam = sc.camera(self.camera_id)
        n_batches = sc.n_frames(self.camera_id) // self.batch_size
        for b in range(n_batches):
            f0 = b * self.batch_size
            t0 = f0 / cam.fps
            records = []
            visits = sc.active_visits(self.camera_id, f0)
            for v in sorted(visits, key=lambda v: v.person_uid):
                key = (v.person_uid, v.start)
                lid = self._local_ids.setdefault(key, len(self._local_ids) + 1)
                x, y, w, h = sc.person_state(v, f0).bbox
                records.append(
                    MetadataRecord(
                        record_time=t0,
                        camera_id=self.camera_id,
                        class_id=0,
                        bbox=(x, y, w, h),
                        feature=sc.feature(v.person_uid),
                        local_id=lid,
                        anomaly_score=SCORE_CEILING,
                    )
                )
            count = len(records)
            yield BatchResult(
                camera_id=self.camera_id,
                batch_index=b,
                start_time=t0,
                end_time=(f0 + self.batch_size) / cam.fps,
                last_frame_time=(f0 + self.batch_size - 1) / cam.fps,
                frame_count=self.batch_size,
                person_counts=[count] * self.batch_size,
                n_detections=count * self.batch_size,
                alerts=[],
                records=records,
                window_scores=[],
                keyframe=0 if count else None,
            )

