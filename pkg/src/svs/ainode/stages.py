"""Pluggable perception stages and their deterministic reference versions.

The reference stages read the synthetic ground truth instead of pixels.
Any object with the same method signature can be swapped in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from ..errors import StageError
from ..scene import DetectorNoise, FrameTruth, MotionTemplate
from ..server.records import SCORE_CEILING
from .tracker import iou_matrix
from .types import Detection, FrameBatch, PoseWindow


class Detector(Protocol):
    def detect(self, frame: FrameTruth) -> list[Detection]: ...


class FeatureExtractor(Protocol):
    def extract(self, detections: Sequence[Detection]) -> list[Detection]: ...


class BehaviorScorer(Protocol):
    def score(self, window: PoseWindow) -> float | None: ...


def _frame_rng(seed: int, camera_id: int, frame_index: int, salt: int) -> np.random.Generator:
    return np.random.default_rng([seed, camera_id, frame_index, salt])


class TruthDetector:
    """Reads persons and anomaly objects off the frame truth.

    Confidence falls with occlusion (overlap with another person), which is
    what routes crowded detections into the tracker's second stage.
    ``miss_rate`` drops individual detections; ``box_jitter_px`` shifts
    boxes (and their keypoints) by Gaussian noise, clipped to the frame.
    """

    def __init__(
        self,
        noise: DetectorNoise = DetectorNoise(),
        seed: int = 0,
        anomaly_class_ids: Mapping[int, str] | None = None,
        frame_size: tuple[int, int] = (1280, 720),
    ):
        self.noise = noise
        self.seed = seed
        self.anomaly_class_ids = dict(anomaly_class_ids or {})
        self.width, self.height = frame_size

    def detect(self, frame: FrameTruth) -> list[Detection]:
        noise = self.noise
        noisy = noise.miss_rate > 0 or noise.box_jitter_px > 0
        rng = _frame_rng(self.seed, frame.camera_id, frame.frame_index, 0xDE7) if noisy else None
        boxes = [p.bbox for p in frame.persons]
        overlap = iou_matrix(boxes, boxes)
        if len(boxes):
            np.fill_diagonal(overlap, 0.0)
        out: list[Detection] = []
        for i, p in enumerate(frame.persons):
            if rng is not None and noise.miss_rate > 0 and rng.random() < noise.miss_rate:
                continue
            occlusion = float(overlap[i].max()) if len(boxes) > 1 else 0.0
            conf = min(max(0.95 - 0.6 * occlusion, 0.05), 0.99)
            bbox, kp = p.bbox, p.keypoints
            if rng is not None and noise.box_jitter_px > 0:
                x, y, w, h = bbox
                dx, dy = rng.normal(0.0, noise.box_jitter_px, size=2)
                nx = min(max(x + dx, 0.0), self.width - w)
                ny = min(max(y + dy, 0.0), self.height - h)
                kp = kp.copy()
                kp[:, 0] += nx - x
                kp[:, 1] += ny - y
                bbox = (nx, ny, w, h)
            out.append(
                Detection(
                    camera_id=frame.camera_id,
                    frame_index=frame.frame_index,
                    frame_time=frame.timestamp,
                    class_id=0,
                    bbox=bbox,
                    confidence=conf,
                    keypoints=kp,
                    truth_uid=p.person_uid,
                )
            )
        for obj in frame.objects:
            if rng is not None and noise.miss_rate > 0 and rng.random() < noise.miss_rate:
                continue
            out.append(
                Detection(
                    camera_id=frame.camera_id,
                    frame_index=frame.frame_index,
                    frame_time=frame.timestamp,
                    class_id=obj.class_id,
                    bbox=obj.bbox,
                    confidence=0.9,
                    class_label=obj.class_label,
                    anomalous=obj.class_id in self.anomaly_class_ids,
                )
            )
        return out


def detect_objects(batch: FrameBatch, detector: Detector) -> list[list[Detection]]:
    try:
        return [detector.detect(frame) for frame in batch.frames]
    except StageError:
        raise
    except Exception as exc:
        raise StageError("detect", batch.camera_id, batch.batch_index, repr(exc)) from exc


class TruthExtractor:
    """Returns each person's ground-truth appearance vector, optionally noised."""

    def __init__(self, lookup: Callable[[int], np.ndarray], sigma: float = 0.0, seed: int = 0):
        self.lookup = lookup
        self.sigma = sigma
        self.seed = seed

    def extract(self, detections: Sequence[Detection]) -> list[Detection]:
        for d in detections:
            if not d.is_human:
                continue
            if d.truth_uid is None:
                raise StageError("extract", d.camera_id, -1, f"detection at frame {d.frame_index} has no truth linkage")
            f = np.array(self.lookup(d.truth_uid), dtype=float)
            if self.sigma > 0:
                rng = _frame_rng(self.seed, d.camera_id, d.frame_index, 0xFEA7 + d.truth_uid)
                f = f + rng.normal(0.0, self.sigma, size=f.shape)
            f /= np.linalg.norm(f)
            d.feature = f
        return list(detections)


def extract_features(detections: Sequence[Detection], extractor: FeatureExtractor) -> list[Detection]:
    humans = [d for d in detections if d.is_human]
    extractor.extract(humans)
    return list(detections)


# --------------------------------------------------------------------------
# behavior scoring
# --------------------------------------------------------------------------


def keypoint_velocity_variance(track: Sequence[tuple[int, np.ndarray, tuple]]) -> float | None:
    """Mean per-keypoint variance of box-relative keypoint velocity.

    Only consecutive-frame pairs where the keypoint is visible in both frames
    contribute.  Returns ``None`` when fewer than two velocity samples exist.
    """
    if len(track) < 3:
        return None
    frames = np.array([f for f, _, _ in track])
    rel = np.stack([kp[:, :2] - np.asarray(b[:2]) for _, kp, b in track])
    vis = np.stack([kp[:, 2] > 0 for _, kp, _ in track])
    consecutive = np.diff(frames) == 1
    vel = np.diff(rel, axis=0)
    ok = consecutive[:, None] & vis[1:] & vis[:-1]
    n = ok.sum(axis=0)
    usable = n >= 2
    if not usable.any():
        return None
    mask = ok[:, :, None]
    cnt = n[:, None]
    mean = np.where(mask, vel, 0.0).sum(axis=0) / np.maximum(cnt, 1)
    var = np.where(mask, (vel - mean) ** 2, 0.0).sum(axis=0) / np.maximum(cnt, 1)
    return float(var[usable].mean())


def template_velocity_variance(motion: MotionTemplate, anomalous: bool = False) -> float:
    """Velocity variance of the scene generator's sinusoidal keypoint template.

    Velocity of ``A sin(w n + p)`` is ``2 A sin(w / 2) cos(...)``, whose
    variance over whole periods is ``2 A^2 sin^2(w / 2)``.
    """
    amp = motion.amplitude_px * (motion.anomaly_factor if anomalous else 1.0)
    omega = 2.0 * math.pi / motion.period_frames
    return 2.0 * amp**2 * math.sin(omega / 2.0) ** 2


def calibrate_scorer(
    motion: MotionTemplate = MotionTemplate(), margin: float = 1.5, anomalous_target: float = 10.0
) -> tuple[float, float]:
    """Return ``(v0, k)`` for :class:`VarianceScorer`.

    ``v0`` sits ``margin`` times above the normal template's variance; ``k``
    maps a fully anomalous window onto ``anomalous_target``.
    """
    v_norm = template_velocity_variance(motion)
    v_anom = template_velocity_variance(motion, anomalous=True)
    v0 = margin * v_norm
    k = (SCORE_CEILING - anomalous_target) / (v_anom - v0)
    return v0, k


# calibrate_scorer() on the default MotionTemplate, rounded
DEFAULT_V0 = 0.1311
DEFAULT_K = 23.67


@dataclass
class VarianceScorer:
    """Per person: ``40 - k * max(0, v - v0)``; the scene takes the minimum."""

    v0: float = DEFAULT_V0
    k: float = DEFAULT_K

    def person_score(self, v: float) -> float:
        return SCORE_CEILING - self.k * max(0.0, v - self.v0)

    def score(self, window: PoseWindow) -> float | None:
        if not window.has_persons:
            return None
        scores = []
        for track in window.tracks.values():
            v = keypoint_velocity_variance(track)
            if v is not None:
                scores.append(self.person_score(v))
        return min(scores) if scores else SCORE_CEILING


def score_behavior(window: PoseWindow, scorer: BehaviorScorer) -> float | None:
    score = scorer.score(window)
    window.scene_score = score
    return score
