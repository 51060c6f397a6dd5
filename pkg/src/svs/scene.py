"""Deterministic synthetic multi-camera scenes.

A scenario stands in for a camera testbed: every camera shows a number of
walking persons set by a (possibly piecewise-constant) density schedule, and
ground-truth anomaly events can be embedded at known times.  No pixels are
produced; a frame is a list of persons with boxes, 17 COCO keypoints and a
per-identity appearance feature.

Occupancy is organised in *slots*: a camera at density ``d`` has ``d``
slots filled back to back by person visits, so the person count per frame is
exactly ``d`` outside schedule changes.  Frames are random-access: positions
are closed-form (reflected linear motion), so ``next_frame`` needs no state.
"""

from __future__ import annotations

import bisect
import hashlib
import heapq
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigError, EventRangeError, NotFoundError

HUMAN_CLASS = 0
NUM_KEYPOINTS = 17
VISIBLE_CONF = 0.9
OBJECT_ANOMALY = "object_anomaly"
BEHAVIOR_ANOMALY = "behavior_anomaly"
EVENT_KINDS = (OBJECT_ANOMALY, BEHAVIOR_ANOMALY)

# COCO ids where they exist; "gun" has no COCO class and uses a custom id.
DEFAULT_ANOMALY_CLASSES = {"knife": 43, "scissors": 76, "gun": 80}

# Keypoint anchors as fractions of the person box, COCO order
# (nose, eyes, ears, shoulders, elbows, wrists, hips, knees, ankles).
KEYPOINT_ANCHORS = np.array(
    [
        (0.50, 0.08), (0.45, 0.06), (0.55, 0.06), (0.40, 0.08), (0.60, 0.08),
        (0.30, 0.22), (0.70, 0.22), (0.22, 0.38), (0.78, 0.38), (0.20, 0.52),
        (0.80, 0.52), (0.38, 0.55), (0.62, 0.55), (0.37, 0.75), (0.63, 0.75),
        (0.36, 0.95), (0.64, 0.95),
    ]
)

_EPS = 1e-9


def reflect(position: float, upper: float) -> float:
    """Fold an unbounded coordinate into ``[0, upper]`` as if bouncing off both ends."""
    return _fold(position, upper)[0]


def _fold(position: float, upper: float) -> tuple[float, float]:
    if upper <= 0:
        return 0.0, 1.0
    period = 2.0 * upper
    m = position % period
    return (m, 1.0) if m <= upper else (period - m, -1.0)


def first_frame_at(t: float, fps: float) -> int:
    """Index of the first frame whose timestamp is >= ``t``."""
    return int(math.ceil(t * fps - _EPS))


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CameraConfig:
    camera_id: int
    fps: float = 30.0
    width: int = 1280
    height: int = 720
    ingress_delay: float = 3.0
    location_tag: str = ""

    def validate(self) -> None:
        if not isinstance(self.camera_id, int) or self.camera_id < 1:
            raise ConfigError("camera_id", f"must be an integer >= 1, got {self.camera_id!r}")
        if not self.fps > 0:
            raise ConfigError("fps", f"must be > 0, got {self.fps}")
        if not (self.width > 0 and self.height > 0):
            raise ConfigError("width", f"frame size must be positive, got {self.width}x{self.height}")
        if self.ingress_delay < 0:
            raise ConfigError("ingress_delay", f"must be >= 0, got {self.ingress_delay}")


@dataclass(frozen=True)
class GroundTruthEvent:
    """An anomaly placed on the scenario clock.

    ``payload`` is the object class label for object anomalies and the
    affected ``person_uid`` for behavior anomalies; ``None`` for a behavior
    anomaly means "whoever occupies the camera's first slot at that time".
    """

    event_id: str
    kind: str
    camera_id: int
    appearance_time: float
    duration: float
    payload: Any = None

    def validate(self, anomaly_classes: Mapping[str, int] | None = None) -> None:
        if self.kind not in EVENT_KINDS:
            raise ConfigError("kind", f"must be one of {EVENT_KINDS}, got {self.kind!r}")
        if self.appearance_time < 0:
            raise ConfigError("appearance_time", "must be >= 0")
        if not self.duration > 0:
            raise ConfigError("duration", "must be > 0")
        if self.kind == OBJECT_ANOMALY:
            if not isinstance(self.payload, str):
                raise ConfigError("payload", "object anomaly payload must be a class label")
            if anomaly_classes is not None and self.payload not in anomaly_classes:
                raise ConfigError("payload", f"unknown anomaly class {self.payload!r}")
        elif self.payload is not None and not isinstance(self.payload, int):
            raise ConfigError("payload", "behavior anomaly payload must be a person_uid or null")


@dataclass(frozen=True)
class DetectorNoise:
    miss_rate: float = 0.0
    box_jitter_px: float = 0.0
    feature_sigma: float = 0.0

    def validate(self) -> None:
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ConfigError("miss_rate", f"must be in [0, 1], got {self.miss_rate}")
        if self.box_jitter_px < 0:
            raise ConfigError("box_jitter_px", "must be >= 0")
        if self.feature_sigma < 0:
            raise ConfigError("feature_sigma", "must be >= 0")


@dataclass(frozen=True)
class MotionTemplate:
    """Keypoint oscillation relative to the box; anomalies scale the amplitude."""

    amplitude_px: float = 2.0
    period_frames: float = 30.0
    anomaly_factor: float = 4.0

    def validate(self) -> None:
        if self.amplitude_px < 0:
            raise ConfigError("amplitude_px", "must be >= 0")
        if not self.period_frames > 0:
            raise ConfigError("period_frames", "must be > 0")
        if not self.anomaly_factor > 0:
            raise ConfigError("anomaly_factor", "must be > 0")


Schedule = list[tuple[float, int]]


@dataclass(frozen=True)
class ScenarioConfig:
    cameras: tuple[CameraConfig, ...]
    duration: float
    density_level: Any = 0
    events: tuple[GroundTruthEvent, ...] = ()
    seed: int = 0
    detector_noise: DetectorNoise = DetectorNoise()
    time_scale: float = 1.0
    population: int | None = None
    feature_dim: int = 512
    dwell: tuple[float, float] = (20.0, 60.0)
    motion: MotionTemplate = MotionTemplate()
    anomaly_classes: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_ANOMALY_CLASSES))

    def __post_init__(self) -> None:
        object.__setattr__(self, "cameras", tuple(self.cameras))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "dwell", tuple(self.dwell))

    # -- density schedule ------------------------------------------------

    def schedule_for(self, camera_id: int) -> Schedule:
        sched = self.density_level
        if isinstance(sched, Mapping):
            sched = sched.get(camera_id, sched.get(str(camera_id), 0))
        return _normalize_schedule(sched)

    def camera(self, camera_id: int) -> CameraConfig:
        for cam in self.cameras:
            if cam.camera_id == camera_id:
                return cam
        raise NotFoundError(f"unknown camera_id {camera_id}")

    def validate(self) -> None:
        if not self.cameras:
            raise ConfigError("cameras", "at least one camera is required")
        seen = set()
        for cam in self.cameras:
            cam.validate()
            if cam.camera_id in seen:
                raise ConfigError("camera_id", f"duplicate camera_id {cam.camera_id}")
            seen.add(cam.camera_id)
        if not self.duration > 0:
            raise ConfigError("duration", f"must be > 0, got {self.duration}")
        if isinstance(self.density_level, Mapping):
            for key in self.density_level:
                if int(key) not in seen:
                    raise ConfigError("density_level", f"schedule for unknown camera {key}")
        for cam in self.cameras:
            try:
                self.schedule_for(cam.camera_id)
            except (TypeError, ValueError) as exc:
                raise ConfigError("density_level", str(exc)) from exc
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit non-negative integer")
        self.detector_noise.validate()
        self.motion.validate()
        if not self.time_scale > 0:
            raise ConfigError("time_scale", "must be > 0")
        if not (isinstance(self.feature_dim, int) and self.feature_dim >= 2):
            raise ConfigError("feature_dim", "must be an integer >= 2")
        lo, hi = self.dwell
        if not 0 < lo <= hi:
            raise ConfigError("dwell", f"need 0 < min <= max, got {self.dwell}")
        if self.population is not None:
            peak = sum(max(level for _, level in self.schedule_for(c.camera_id)) for c in self.cameras)
            if not isinstance(self.population, int) or self.population < max(peak, 1):
                raise ConfigError(
                    "population", f"must be an integer >= peak concurrent occupancy {peak}"
                )
        for ev in self.events:
            ev.validate(self.anomaly_classes)
            if ev.camera_id not in seen:
                raise ConfigError("camera_id", f"event {ev.event_id} names unknown camera {ev.camera_id}")

    # -- (de)serialization ------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dwell"] = list(self.dwell)
        d["anomaly_classes"] = dict(self.anomaly_classes)
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioConfig":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown scenario field")
        if "cameras" not in data:
            raise ConfigError("cameras", "missing")
        if "duration" not in data:
            raise ConfigError("duration", "missing")
        try:
            data["cameras"] = tuple(CameraConfig(**c) for c in data["cameras"])
            data["events"] = tuple(GroundTruthEvent(**e) for e in data.get("events", ()))
            if "detector_noise" in data:
                data["detector_noise"] = DetectorNoise(**data["detector_noise"])
            if "motion" in data:
                data["motion"] = MotionTemplate(**data["motion"])
        except TypeError as exc:
            raise ConfigError("scenario", str(exc)) from exc
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _normalize_schedule(sched: Any) -> Schedule:
    if isinstance(sched, bool):
        raise TypeError("density level must be an integer")
    if isinstance(sched, int):
        points = [(0.0, sched)]
    else:
        points = sorted((float(t), int(level)) for t, level in sched)
        if not points or points[0][0] > 0:
            points.insert(0, (0.0, 0))
    for t, level in points:
        if not 0 <= level <= 9:
            raise ValueError(f"density level {level} outside [0, 9]")
        if t < 0:
            raise ValueError("schedule times must be >= 0")
    return points


# --------------------------------------------------------------------------
# frame content
# --------------------------------------------------------------------------


@dataclass
class ScenePerson:
    person_uid: int
    bbox: tuple[float, float, float, float]
    keypoints: np.ndarray
    feature: np.ndarray
    velocity: tuple[float, float]


@dataclass
class SceneObject:
    event_id: str
    class_label: str
    class_id: int
    bbox: tuple[float, float, float, float]


@dataclass
class FrameTruth:
    camera_id: int
    frame_index: int
    timestamp: float
    persons: list[ScenePerson]
    objects: list[SceneObject]
    events: list[str]

    def digest(self) -> bytes:
        h = hashlib.sha256()
        h.update(repr((self.camera_id, self.frame_index, self.timestamp, self.events)).encode())
        for p in self.persons:
            h.update(repr((p.person_uid, p.bbox, p.velocity)).encode())
            h.update(p.keypoints.tobytes())
            h.update(p.feature.tobytes())
        for o in self.objects:
            h.update(repr((o.event_id, o.class_label, o.class_id, o.bbox)).encode())
        return h.digest()


@dataclass(frozen=True)
class Visit:
    """One person occupying one slot of one camera for a frame range."""

    person_uid: int
    camera_id: int
    slot: int
    start: float
    end: float
    frame_start: int
    frame_end: int
    x0: float
    y0: float
    w: float
    h: float
    vx: float
    vy: float
    phases: np.ndarray

    def covers(self, frame_index: int) -> bool:
        return self.frame_start <= frame_index < self.frame_end


# --------------------------------------------------------------------------
# scenario
# --------------------------------------------------------------------------


class Scenario:
    """Immutable, random-access frame generator built from a ScenarioConfig."""

    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.config = config
        self._cameras = {c.camera_id: c for c in config.cameras}
        self._features: dict[int, np.ndarray] = {}
        self._resolved: dict[str, int] = {}
        holds: dict[tuple[int, int, float], float] = {}
        behavior = sorted(
            (e for e in config.events if e.kind == BEHAVIOR_ANOMALY),
            key=lambda e: (e.appearance_time, e.event_id),
        )
        visits = self._generate(holds)
        for ev in behavior:
            cam = self._cameras[ev.camera_id]
            fa = first_frame_at(ev.appearance_time, cam.fps)
            target = _find_target(visits[ev.camera_id], ev, fa)
            if target is None:
                raise ConfigError(
                    "payload", f"event {ev.event_id}: no matching person on camera {ev.camera_id} at t={ev.appearance_time}"
                )
            need = ev.appearance_time + ev.duration + 1.0 / cam.fps
            if target.end < need:
                holds[(target.camera_id, target.slot, target.start)] = need
                visits = self._generate(holds)
                target = _find_target(visits[ev.camera_id], ev, fa)
            self._resolved[ev.event_id] = target.person_uid
        self._visits = visits
        self._slot_index: dict[int, list[tuple[list[int], list[Visit]]]] = {}
        for cid, vs in visits.items():
            by_slot: dict[int, list[Visit]] = {}
            for v in vs:
                by_slot.setdefault(v.slot, []).append(v)
            self._slot_index[cid] = [
                ([v.frame_start for v in lst], lst) for _, lst in sorted(by_slot.items())
            ]
        self._events_by_camera: dict[int, list[GroundTruthEvent]] = {}
        for ev in config.events:
            self._events_by_camera.setdefault(ev.camera_id, []).append(ev)
        self._object_boxes = {
            ev.event_id: self._object_box(ev) for ev in config.events if ev.kind == OBJECT_ANOMALY
        }

    # -- generation --------------------------------------------------------

    def _slot_intervals(self, camera_id: int) -> dict[int, list[tuple[float, float]]]:
        sched = self.config.schedule_for(camera_id)
        duration = self.config.duration
        out: dict[int, list[tuple[float, float]]] = {}
        bounds = [t for t, _ in sched] + [duration]
        for i, (t0, level) in enumerate(sched):
            t1 = min(bounds[i + 1], duration)
            if t1 <= t0:
                continue
            for slot in range(level):
                ivs = out.setdefault(slot, [])
                if ivs and abs(ivs[-1][1] - t0) < _EPS:
                    ivs[-1] = (ivs[-1][0], t1)
                else:
                    ivs.append((t0, t1))
        return out

    def _generate(self, holds: Mapping[tuple[int, int, float], float]) -> dict[int, list[Visit]]:
        cfg = self.config
        lo, hi = cfg.dwell
        heap: list[tuple[float, int, int, int]] = []
        intervals: dict[tuple[int, int], list[tuple[float, float]]] = {}
        rngs: dict[tuple[int, int], np.random.Generator] = {}
        ordinals: dict[tuple[int, int], int] = {}
        for cam in cfg.cameras:
            for slot, ivs in self._slot_intervals(cam.camera_id).items():
                key = (cam.camera_id, slot)
                intervals[key] = ivs
                rngs[key] = np.random.default_rng([cfg.seed, cam.camera_id, slot])
                ordinals[key] = 0
                heapq.heappush(heap, (ivs[0][0], cam.camera_id, slot, 0))
        choice_rng = np.random.default_rng([cfg.seed, 0xC401CE])
        busy_until: dict[int, float] = {}
        last_in_slot: dict[tuple[int, int], int] = {}
        visits: dict[int, list[Visit]] = {c.camera_id: [] for c in cfg.cameras}
        while heap:
            t, cid, slot, iv_idx = heapq.heappop(heap)
            key = (cid, slot)
            cam = self._cameras[cid]
            iv_end = intervals[key][iv_idx][1]
            rng = rngs[key]
            dwell = rng.uniform(lo, hi)
            h = rng.uniform(120.0, 260.0) * cam.height / 720.0
            w = 0.4 * h
            x0 = rng.uniform(0.0, cam.width - w)
            y0 = rng.uniform(0.0, cam.height - h)
            vx, vy = rng.uniform(-3.0, 3.0, size=2)
            phases = rng.uniform(0.0, 2 * math.pi, size=(NUM_KEYPOINTS, 2))
            end = min(t + dwell, iv_end)
            end = max(end, min(holds.get((cid, slot, t), end), iv_end))
            if cfg.population is None:
                uid = (cid * 100 + slot) * 100_000 + ordinals[key] + 1
            else:
                idle = [u for u in range(1, cfg.population + 1) if busy_until.get(u, 0.0) <= t + _EPS]
                prev = last_in_slot.get(key)
                if prev in idle and len(idle) > 1:
                    idle.remove(prev)
                uid = int(idle[choice_rng.integers(len(idle))])
                busy_until[uid] = end
                last_in_slot[key] = uid
            ordinals[key] += 1
            visits[cid].append(
                Visit(
                    person_uid=uid, camera_id=cid, slot=slot, start=t, end=end,
                    frame_start=first_frame_at(t, cam.fps), frame_end=first_frame_at(end, cam.fps),
                    x0=float(x0), y0=float(y0), w=float(w), h=float(h),
                    vx=float(vx), vy=float(vy), phases=phases,
                )
            )
            if end < iv_end - _EPS:
                heapq.heappush(heap, (end, cid, slot, iv_idx))
            elif iv_idx + 1 < len(intervals[key]):
                heapq.heappush(heap, (intervals[key][iv_idx + 1][0], cid, slot, iv_idx + 1))
        for vs in visits.values():
            vs.sort(key=lambda v: (v.frame_start, v.slot))
        return visits

    def _object_box(self, ev: GroundTruthEvent) -> tuple[float, float, float, float]:
        cam = self._cameras[ev.camera_id]
        digest = hashlib.sha256(f"{self.config.seed}:{ev.event_id}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        w, h = 60.0, 30.0
        return (float(rng.uniform(0, cam.width - w)), float(rng.uniform(0, cam.height - h)), w, h)

    # -- queries -----------------------------------------------------------

    @property
    def camera_ids(self) -> list[int]:
        return [c.camera_id for c in self.config.cameras]

    def camera(self, camera_id: int) -> CameraConfig:
        try:
            return self._cameras[camera_id]
        except KeyError:
            raise NotFoundError(f"unknown camera_id {camera_id}") from None

    def n_frames(self, camera_id: int) -> int:
        return first_frame_at(self.config.duration, self.camera(camera_id).fps)

    def visits(self, camera_id: int) -> list[Visit]:
        self.camera(camera_id)
        return list(self._visits[camera_id])

    def resolved_person(self, event_id: str) -> int | None:
        return self._resolved.get(event_id)

    def feature(self, person_uid: int) -> np.ndarray:
        f = self._features.get(person_uid)
        if f is None:
            rng = np.random.default_rng([self.config.seed, 7, person_uid])
            f = rng.standard_normal(self.config.feature_dim)
            f /= np.linalg.norm(f)
            f.setflags(write=False)
            self._features[person_uid] = f
        return f

    def active_visits(self, camera_id: int, frame_index: int) -> list[Visit]:
        out = []
        for starts, lst in self._slot_index.get(camera_id, ()):
            i = bisect.bisect_right(starts, frame_index) - 1
            if i >= 0 and lst[i].covers(frame_index):
                out.append(lst[i])
        return out

    def active_events(self, camera_id: int, frame_index: int) -> list[GroundTruthEvent]:
        fps = self.camera(camera_id).fps
        return [
            ev
            for ev in self._events_by_camera.get(camera_id, ())
            if first_frame_at(ev.appearance_time, fps)
            <= frame_index
            < first_frame_at(ev.appearance_time + ev.duration, fps)
        ]

    def person_state(self, visit: Visit, frame_index: int, anomalous: bool = False) -> ScenePerson:
        cam = self._cameras[visit.camera_id]
        n = frame_index - visit.frame_start
        ux, uy = cam.width - visit.w, cam.height - visit.h
        px, py = visit.x0 + visit.vx * n, visit.y0 + visit.vy * n
        x, sx = _fold(px, ux)
        y, sy = _fold(py, uy)
        motion = self.config.motion
        amp = motion.amplitude_px * (motion.anomaly_factor if anomalous else 1.0)
        omega = 2.0 * math.pi / motion.period_frames
        kp = np.empty((NUM_KEYPOINTS, 3))
        kp[:, 0] = x + KEYPOINT_ANCHORS[:, 0] * visit.w + amp * np.sin(omega * frame_index + visit.phases[:, 0])
        kp[:, 1] = y + KEYPOINT_ANCHORS[:, 1] * visit.h + amp * np.sin(omega * frame_index + visit.phases[:, 1])
        inside = (kp[:, 0] >= 0) & (kp[:, 0] < cam.width) & (kp[:, 1] >= 0) & (kp[:, 1] < cam.height)
        kp[:, 2] = np.where(inside, VISIBLE_CONF, 0.0)
        kp[:, 0] = np.clip(kp[:, 0], 0.0, cam.width - 1e-6)
        kp[:, 1] = np.clip(kp[:, 1], 0.0, cam.height - 1e-6)
        return ScenePerson(
            person_uid=visit.person_uid,
            bbox=(x, y, visit.w, visit.h),
            keypoints=kp,
            feature=self.feature(visit.person_uid),
            velocity=(sx * visit.vx, sy * visit.vy),
        )

    def next_frame(self, camera_id: int, frame_index: int) -> FrameTruth:
        cam = self.camera(camera_id)
        if not 0 <= frame_index < self.n_frames(camera_id):
            raise IndexError(f"frame {frame_index} outside [0, {self.n_frames(camera_id)})")
        events = self.active_events(camera_id, frame_index)
        anomalous_uids = {
            self._resolved[ev.event_id] for ev in events if ev.kind == BEHAVIOR_ANOMALY
        }
        persons = [
            self.person_state(v, frame_index, v.person_uid in anomalous_uids)
            for v in self.active_visits(camera_id, frame_index)
        ]
        persons.sort(key=lambda p: p.person_uid)
        objects = [
            SceneObject(ev.event_id, ev.payload, int(self.config.anomaly_classes[ev.payload]), self._object_boxes[ev.event_id])
            for ev in events
            if ev.kind == OBJECT_ANOMALY
        ]
        return FrameTruth(
            camera_id=camera_id,
            frame_index=frame_index,
            timestamp=frame_index / cam.fps,
            persons=persons,
            objects=objects,
            events=[ev.event_id for ev in events],
        )

    def frames(self, camera_id: int, start: int = 0, stop: int | None = None) -> Iterator[FrameTruth]:
        stop = self.n_frames(camera_id) if stop is None else min(stop, self.n_frames(camera_id))
        for i in range(start, stop):
            yield self.next_frame(camera_id, i)

    def inject_event(self, event: GroundTruthEvent) -> "Scenario":
        return inject_event(self, event)


def _find_target(visits: Sequence[Visit], ev: GroundTruthEvent, frame_index: int) -> Visit | None:
    for v in visits:
        if not v.covers(frame_index):
            continue
        if ev.payload is None and v.slot == 0:
            return v
        if ev.payload is not None and v.person_uid == ev.payload:
            return v
    return None


def build_scenario(config: ScenarioConfig) -> Scenario:
    return Scenario(config)


def inject_event(scenario: Scenario, event: GroundTruthEvent) -> Scenario:
    cfg = scenario.config
    if not 0 <= event.appearance_time < cfg.duration:
        raise EventRangeError(
            f"event {event.event_id} appears at {event.appearance_time}, outside [0, {cfg.duration})"
        )
    if event.appearance_time + event.duration > cfg.duration + _EPS:
        raise EventRangeError(f"event {event.event_id} ends after the scenario duration {cfg.duration}")
    scenario.camera(event.camera_id)
    return Scenario(replace(cfg, events=cfg.events + (event,)))
