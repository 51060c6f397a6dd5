"""Cross-camera re-identification against a cosine-similarity gallery."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import RecordRejected

FIRST_GLOBAL_ID = 1001


@dataclass
class GlobalIdentity:
    global_id: int
    representative_feature: np.ndarray
    last_seen: float
    cameras_seen: set[int] = field(default_factory=set)
    observations: int = 0


def normalize(feature: np.ndarray) -> np.ndarray:
    f = np.asarray(feature, dtype=float)
    n = float(np.linalg.norm(f))
    if not np.isfinite(n) or n == 0.0:
        raise RecordRejected("zero-norm feature")
    return f / n


class Gallery:
    """Identities seen within the last ``horizon`` seconds, stored as rows of a matrix.

    A query is compared with every live identity; the best match is reused
    when its cosine similarity reaches ``theta``, otherwise a new ID is
    minted.  Ties on similarity go to the older (lower) ID.  The ID counter
    is never rewound, not even by :meth:`clear`.
    """

    def __init__(self, theta: float = 0.7, horizon: float = 600.0, dim: int | None = None):
        if not -1.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [-1, 1]")
        if horizon <= 0:
            raise ValueError("horizon must be > 0")
        self.theta = theta
        self.horizon = horizon
        self.next_id = FIRST_GLOBAL_ID
        self._dim = dim
        self._init_storage()

    def _init_storage(self, capacity: int = 64) -> None:
        self._n = 0
        self._ids = np.zeros(capacity, dtype=np.int64)
        self._last = np.zeros(capacity)
        self._count = np.zeros(capacity, dtype=np.int64)
        self._sums: np.ndarray | None = None
        self._reps: np.ndarray | None = None
        self._cameras: list[set[int]] = []
        self._latest = -np.inf

    def __len__(self) -> int:
        return self._n

    def _grow(self) -> None:
        cap = max(64, 2 * len(self._ids))
        for name in ("_ids", "_last", "_count"):
            old = getattr(self, name)
            new = np.zeros(cap, dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)
        for name in ("_sums", "_reps"):
            old = getattr(self, name)
            new = np.zeros((cap, old.shape[1]))
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def _compact(self) -> None:
        keep = np.nonzero(self._last[: self._n] >= self._latest - 2 * self.horizon)[0]
        if len(keep) == self._n:
            return
        m = len(keep)
        for name in ("_ids", "_last", "_count", "_sums", "_reps"):
            arr = getattr(self, name)
            arr[:m] = arr[keep]
        self._cameras = [self._cameras[i] for i in keep]
        self._n = m

    def similarities(self, feature: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        """``(global_ids, cosine)`` for every identity live at time ``t``."""
        if self._n == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        live = np.abs(t - self._last[: self._n]) <= self.horizon
        idx = np.nonzero(live)[0]
        return self._ids[idx], self._reps[idx] @ normalize(feature)

    def assign(self, feature: np.ndarray, t: float, camera_id: int | None = None) -> int:
        f = normalize(feature)
        if self._reps is None:
            self._dim = self._dim or len(f)
            self._sums = np.zeros((len(self._ids), self._dim))
            self._reps = np.zeros((len(self._ids), self._dim))
        if len(f) != self._reps.shape[1]:
            raise RecordRejected(f"feature dimension {len(f)} != gallery dimension {self._reps.shape[1]}")
        if t > self._latest:
            self._latest = t
        row = -1
        if self._n:
            live = np.nonzero(np.abs(t - self._last[: self._n]) <= self.horizon)[0]
            if len(live):
                sims = self._reps[live] @ f
                best = int(np.argmax(sims))
                if sims[best] >= self.theta:
                    row = int(live[best])
        if row < 0:
            if self._n == len(self._ids):
                self._compact()
                if self._n == len(self._ids):
                    self._grow()
            row = self._n
            self._n += 1
            self._ids[row] = self.next_id
            self.next_id += 1
            self._sums[row] = 0.0
            self._count[row] = 0
            self._last[row] = t
            self._cameras.append(set())
        self._sums[row] += f
        self._reps[row] = self._sums[row] / np.linalg.norm(self._sums[row])
        self._count[row] += 1
        self._last[row] = max(self._last[row], t)
        if camera_id is not None:
            self._cameras[row].add(camera_id)
        return int(self._ids[row])

    def identities(self) -> list[GlobalIdentity]:
        return [
            GlobalIdentity(
                global_id=int(self._ids[i]),
                representative_feature=self._reps[i].copy(),
                last_seen=float(self._last[i]),
                cameras_seen=set(self._cameras[i]),
                observations=int(self._count[i]),
            )
            for i in range(self._n)
        ]

    def clear(self) -> None:
        """Forget every identity; the ID counter carries on."""
        self._init_storage()
