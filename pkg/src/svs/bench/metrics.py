"""Sample types and the warm-up/cool-down summarizer."""

from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from ..errors import InsufficientSamples


@dataclass(frozen=True)
class MetricSample:
    experiment: str
    node_count: int
    density: float
    batch: int
    latency_s: float
    throughput_fps: float
    detections: int
    ts: float


@dataclass(frozen=True)
class PcpSample:
    anomaly_kind: str
    node_count: int
    run: int
    event_id: str
    subscriber_id: str
    origin_time: float
    receipt_time: float | None
    lost: bool = False

    @property
    def pcp_latency(self) -> float | None:
        return None if self.receipt_time is None else self.receipt_time - self.origin_time


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    min: float
    max: float
    std: float

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(values: Sequence[float]) -> SummaryStats:
    """Mean, extremes and sample standard deviation (zero for a single value)."""
    vals = [float(v) for v in values]
    if not vals:
        raise InsufficientSamples(1, 0)
    std = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return SummaryStats(len(vals), math.fsum(vals) / len(vals), min(vals), max(vals), std)


def summarize_middle(values: Sequence[float], warmup: int, cooldown: int) -> SummaryStats:
    """Summarize ``values[warmup : N - cooldown]``, dropping warm-up and cool-down."""
    if warmup < 0 or cooldown < 0:
        raise ValueError("warmup and cooldown must be >= 0")
    n = len(values)
    if warmup + cooldown >= n:
        raise InsufficientSamples(warmup + cooldown + 1, n)
    return summarize(values[warmup : n - cooldown])


def compute_throughput(frames_per_node: Iterable[int], window: float) -> tuple[float, float]:
    """``(system_fps, per_node_fps)`` for frames completed within ``window`` seconds."""
    if not window > 0:
        raise ValueError("window must be > 0")
    counts = list(frames_per_node)
    total = sum(counts)
    system = total / window
    return system, (system / len(counts) if counts else 0.0)
