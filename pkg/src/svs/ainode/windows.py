"""Sliding pose windows over a per-camera frame history."""

from __future__ import annotations

from collections import deque
from typing import Sequence

import numpy as np

from .types import BBox, PoseWindow


def window_count(n_frames: int, window: int = 30, stride: int = 20) -> int:
    if not 0 < stride <= window:
        raise ValueError(f"need 0 < stride <= window, got stride={stride} window={window}")
    if n_frames < window:
        return 0
    return (n_frames - window) // stride + 1


def window_spans(n_frames: int, window: int = 30, stride: int = 20) -> list[tuple[int, int]]:
    return [(w * stride, w * stride + window) for w in range(window_count(n_frames, window, stride))]


FramePoses = list[tuple[int, np.ndarray, BBox]]


def window_poses(
    history: Sequence[FramePoses], camera_id: int = 0, window: int = 30, stride: int = 20, first_frame: int = 0
) -> list[PoseWindow]:
    """Cut a frame history (one list of ``(local_id, keypoints, bbox)`` per frame) into windows."""
    out = []
    for w, (a, b) in enumerate(window_spans(len(history), window, stride)):
        out.append(_make_window(camera_id, w, first_frame + a, [(first_frame + a + i, history[a + i]) for i in range(b - a)]))
    return out


def _make_window(camera_id: int, index: int, start: int, frames: Sequence[tuple[int, FramePoses]]) -> PoseWindow:
    tracks: dict[int, list] = {}
    has_persons = False
    for f, poses in frames:
        for local_id, kp, bbox in poses:
            has_persons = True
            tracks.setdefault(local_id, []).append((f, kp, bbox))
    return PoseWindow(
        camera_id=camera_id,
        window_index=index,
        start_frame=start,
        end_frame=start + len(frames),
        tracks=tracks,
        has_persons=has_persons,
    )


class WindowBuilder:
    """Ring buffer of recent frames that releases each window once complete.

    Independent of batching: a window may straddle two batches and is
    released by whichever push completes it.
    """

    def __init__(self, camera_id: int, window: int = 30, stride: int = 20):
        window_count(window, window, stride)
        self.camera_id = camera_id
        self.window = window
        self.stride = stride
        self.frames_seen = 0
        self._next_window = 0
        self._buf: deque[tuple[int, FramePoses]] = deque(maxlen=window)

    def push(self, frame_index: int, poses: FramePoses) -> list[PoseWindow]:
        self._buf.append((frame_index, poses))
        self.frames_seen += 1
        out = []
        while window_count(self.frames_seen, self.window, self.stride) > self._next_window:
            start_pos = self._next_window * self.stride
            offset = start_pos - (self.frames_seen - len(self._buf))
            frames = list(self._buf)[offset:offset + self.window]
            out.append(_make_window(self.camera_id, self._next_window, frames[0][0], frames))
            self._next_window += 1
        return out
