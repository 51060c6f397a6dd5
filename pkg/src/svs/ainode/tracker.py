"""Two-stage greedy IoU association in the style of ByteTrack.

High-confidence detections are matched first against every live track;
the leftovers (low-confidence detections plus unmatched high ones) are then
matched against tracks still unmatched.  There is no Kalman filter: tracks
are extrapolated with their last observed velocity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .types import BBox, Detection, Tracklet


@dataclass(frozen=True)
class TrackerConfig:
    high_confidence: float = 0.5
    match_iou: float = 0.3
    max_age: float = 1.0


def iou_matrix(a: Sequence[BBox], b: Sequence[BBox]) -> np.ndarray:
    """Pairwise IoU of ``[x, y, w, h]`` boxes."""
    if not len(a) or not len(b):
        return np.zeros((len(a), len(b)))
    A = np.asarray(a, dtype=float)
    B = np.asarray(b, dtype=float)
    ax2, ay2 = A[:, 0] + A[:, 2], A[:, 1] + A[:, 3]
    bx2, by2 = B[:, 0] + B[:, 2], B[:, 1] + B[:, 3]
    iw = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(A[:, 0][:, None], B[:, 0][None, :])
    ih = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(A[:, 1][:, None], B[:, 1][None, :])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = (A[:, 2] * A[:, 3])[:, None] + (B[:, 2] * B[:, 3])[None, :] - inter
    return np.where(union > 0, inter / union, 0.0)


def greedy_match(iou: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    """Repeatedly take the highest-IoU free pair until none reaches ``threshold``."""
    if iou.size == 0:
        return []
    rows, cols = np.nonzero(iou >= threshold)
    if not len(rows):
        return []
    order = np.lexsort((cols, rows, -iou[rows, cols]))
    used_r: set[int] = set()
    used_c: set[int] = set()
    out = []
    for k in order:
        r, c = int(rows[k]), int(cols[k])
        if r in used_r or c in used_c:
            continue
        used_r.add(r)
        used_c.add(c)
        out.append((r, c))
    return out


class IoUTracker:
    def __init__(self, camera_id: int, config: TrackerConfig = TrackerConfig()):
        self.camera_id = camera_id
        self.config = config
        self.tracks: list[Tracklet] = []
        self.closed = 0
        self._next_id = 1

    def _open(self, det: Detection, t: float) -> Tracklet:
        tr = Tracklet(local_id=self._next_id, camera_id=self.camera_id, detections=[det], last_seen=t)
        self._next_id += 1
        det.local_id = tr.local_id
        self.tracks.append(tr)
        return tr

    def update(self, detections: Sequence[Detection], t: float) -> list[Tracklet]:
        """Associate one frame's detections; sets ``local_id`` on each of them."""
        cfg = self.config
        live = [tr for tr in self.tracks if t - tr.last_seen <= cfg.max_age]
        self.closed += len(self.tracks) - len(live)
        self.tracks = live
        predicted = [tr.predicted_box(t) for tr in self.tracks]
        dets = list(detections)
        high = [i for i, d in enumerate(dets) if d.confidence >= cfg.high_confidence]
        free_tracks = list(range(len(self.tracks)))
        matched_dets: set[int] = set()

        def assign(det_idx: list[int]) -> None:
            iou = iou_matrix([dets[i].bbox for i in det_idx], [predicted[j] for j in free_tracks])
            pairs = greedy_match(iou, cfg.match_iou)
            taken = set()
            for r, c in pairs:
                d, tr = dets[det_idx[r]], self.tracks[free_tracks[c]]
                d.local_id = tr.local_id
                tr.detections.append(d)
                tr.last_seen = t
                matched_dets.add(det_idx[r])
                taken.add(free_tracks[c])
            free_tracks[:] = [j for j in free_tracks if j not in taken]

        assign(high)
        assign([i for i in range(len(dets)) if i not in matched_dets])
        for i, d in enumerate(dets):
            if i not in matched_dets:
                self._open(d, t)
        return self.tracks
