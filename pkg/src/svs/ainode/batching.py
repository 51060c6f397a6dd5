"""Grouping per-camera frame streams into fixed-size batches."""

from __future__ import annotations

from typing import Iterable, Iterator

from ..errors import OrderingError
from ..scene import FrameTruth
from .types import FrameBatch


class Batcher:
    """Accumulates one camera's frames into non-overlapping batches.

    A trailing partial batch is held until it fills; it is never emitted.
    """

    def __init__(self, camera_id: int, batch_size: int = 30, fps: float = 30.0):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.camera_id = camera_id
        self.batch_size = batch_size
        self.fps = fps
        self.consumed = 0
        self.emitted = 0
        self._next_frame: int | None = None
        self._pending: list[FrameTruth] = []

    @property
    def pending(self) -> int:
        return len(self._pending)

    def push(self, frame: FrameTruth) -> FrameBatch | None:
        if frame.camera_id != self.camera_id:
            raise ValueError(f"frame from camera {frame.camera_id} pushed to batcher {self.camera_id}")
        if self._next_frame is not None and frame.frame_index != self._next_frame:
            raise OrderingError(self.camera_id, self._next_frame, frame.frame_index)
        self._next_frame = frame.frame_index + 1
        self.consumed += 1
        self._pending.append(frame)
        if len(self._pending) < self.batch_size:
            return None
        frames, self._pending = self._pending, []
        batch = FrameBatch(
            camera_id=self.camera_id,
            batch_index=self.emitted,
            frames=frames,
            start_time=frames[0].timestamp,
            end_time=frames[0].timestamp + self.batch_size / self.fps,
        )
        self.emitted += 1
        return batch


def batch_frames(stream: Iterable[FrameTruth], batch_size: int = 30, fps: float = 30.0) -> Iterator[FrameBatch]:
    """Batch a (possibly interleaved) multi-camera frame stream."""
    batchers: dict[int, Batcher] = {}
    for frame in stream:
        b = batchers.get(frame.camera_id)
        if b is None:
            b = batchers[frame.camera_id] = Batcher(frame.camera_id, batch_size, fps)
        batch = b.push(frame)
        if batch is not None:
            yield batch
