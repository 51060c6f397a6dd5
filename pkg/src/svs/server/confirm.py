"""Behavioral anomaly confirmation against the preceding scene scores."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..cloud.messages import BEHAVIOR_TOPIC, NotificationMessage


@dataclass
class _CameraRun:
    last_time: float | None = None
    length: int = 0
    start_time: float = 0.0
    scores: list[float] = field(default_factory=list)
    notified: bool = False


class BehaviorConfirmer:
    """Raises one notification per maximal run of ``run_length`` sub-threshold scores.

    Each camera contributes one scene score per distinct record time (every
    record of a keyframe carries the same score).  A score at or above
    ``tau`` ends the run and re-arms the camera.
    """

    def __init__(self, tau: float = 20.0, run_length: int = 3):
        if run_length < 1:
            raise ValueError("run_length must be >= 1")
        self.tau = tau
        self.run_length = run_length
        self._runs: dict[int, _CameraRun] = {}
        self.notifications = 0

    def observe(self, camera_id: int, record_time: float, score: float | None) -> NotificationMessage | None:
        if score is None:
            return None
        run = self._runs.setdefault(camera_id, _CameraRun())
        if run.last_time is not None and record_time <= run.last_time:
            return None
        run.last_time = record_time
        if score >= self.tau:
            run.length, run.notified, run.scores = 0, False, []
            return None
        if run.length == 0:
            run.start_time = record_time
        run.length += 1
        run.scores.append(score)
        if run.length < self.run_length or run.notified:
            return None
        run.notified = True
        self.notifications += 1
        return NotificationMessage(
            topic=BEHAVIOR_TOPIC,
            origin_time=run.start_time,
            camera_id=camera_id,
            severity="high",
            body={
                "scores": list(run.scores[-self.run_length:]),
                "confirmed_at": record_time,
                "tau": self.tau,
                "path": [f"ai-node:{camera_id}", "server"],
            },
        )

    def clear(self) -> None:
        self._runs.clear()


def confirm_scores(scores, tau: float = 20.0, run_length: int = 3) -> list[int]:
    """Indices in a single camera's score sequence at which a notification fires."""
    c = BehaviorConfirmer(tau, run_length)
    return [i for i, s in enumerate(scores) if c.observe(1, float(i), s) is not None]
