"""The load-stress, endurance and end-to-end notification latency experiments."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ..ainode.pipeline import MAX_PIPELINES, CostModel, GroundTruthSummarizer, run_camera
from ..ainode.types import BatchResult
from ..cloud.messages import BEHAVIOR_TOPIC, object_topic
from ..cloud.profile import LatencyProfile
from ..errors import ConfigError
from ..scene import (
    BEHAVIOR_ANOMALY,
    OBJECT_ANOMALY,
    CameraConfig,
    DetectorNoise,
    GroundTruthEvent,
    Scenario,
    ScenarioConfig,
    build_scenario,
)
from ..server.node import ServerConfig
from ..sim.analytic import run_analytic
from ..sim.topology import FILE, LIVE, BatchTrace, Topology, TopologyConfig
from .metrics import MetricSample, PcpSample, SummaryStats, summarize, summarize_middle

log = logging.getLogger(__name__)

KINDS = ("load_stress", "endurance", "pcp")
PCP_KINDS = {"object": OBJECT_ANOMALY, "behavior": BEHAVIOR_ANOMALY}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "load_stress"
    node_counts: tuple[int, ...] = (1, 4, 8, 12)
    density_levels: tuple[int, ...] = tuple(range(10))
    duration: float = 150.0
    fps: float = 30.0
    batch_size: int = 30
    warmup_batches: int = 25
    cooldown_batches: int = 25
    runs: int = 20
    subscribers: int = 3
    anomaly_kind: tuple[str, ...] = ("object", "behavior")
    time_scale: float | None = None
    seed: int = 0
    ingress_delay: float = 3.0
    feature_dim: int = 512
    cost: CostModel = CostModel()
    profile: LatencyProfile = LatencyProfile()
    # pcp
    event_window: tuple[float, float] = (4.0, 10.0)
    object_duration: float = 3.0
    behavior_duration: float = 8.0
    object_class: str = "knife"
    timeout: float = 120.0
    tolerance: float = 0.05
    # endurance
    density_schedule: Any = None
    sample_period: float = 60.0
    engine: str = "analytic"
    source: str = LIVE
    reset_rows: int = 50_000
    reset_hours: float = 24.0

    def __post_init__(self) -> None:
        for name in ("node_counts", "density_levels", "anomaly_kind", "event_window"):
            v = getattr(self, name)
            object.__setattr__(self, name, (v,) if isinstance(v, (int, str)) else tuple(v))

    @property
    def total_batches(self) -> int:
        return int(math.floor(self.duration * self.fps + 1e-9)) // self.batch_size

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {KINDS}")
        if not self.node_counts or any(n < 1 or n > MAX_PIPELINES for n in self.node_counts):
            raise ConfigError("node_counts", f"each count must lie in [1, {MAX_PIPELINES}]")
        if any(not 0 <= d <= 9 for d in self.density_levels):
            raise ConfigError("density_levels", "levels must lie in [0, 9]")
        if not self.duration > 0:
            raise ConfigError("duration", "must be > 0")
        if self.runs < 1:
            raise ConfigError("runs", "must be >= 1")
        if self.kind == "load_stress" and self.warmup_batches + self.cooldown_batches >= self.total_batches:
            raise ConfigError("warmup_batches", "warmup + cooldown must be below the batch count")
        if any(k not in PCP_KINDS for k in self.anomaly_kind):
            raise ConfigError("anomaly_kind", f"kinds are {sorted(PCP_KINDS)}")
        if self.engine not in ("analytic", "des"):
            raise ConfigError("engine", "must be 'analytic' or 'des'")
        if self.source not in (FILE, LIVE):
            raise ConfigError("source", f"must be {FILE!r} or {LIVE!r}")
        lo, hi = self.event_window
        if not 0 <= lo < hi:
            raise ConfigError("event_window", "need 0 <= lo < hi")

    def topology(self, node_count: int, **overrides) -> TopologyConfig:
        server = ServerConfig(reset_rows=self.reset_rows, reset_hours=self.reset_hours)
        kw = dict(cost=self.cost, profile=self.profile, server=server, node_count=node_count,
                  time_scale=self.time_scale)
        kw.update(overrides)
        return TopologyConfig(**kw)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        extra = sorted(set(data) - names)
        if extra:
            raise ConfigError(extra[0], "unknown experiment field")
        kw = dict(data)
        if "cost" in kw:
            kw["cost"] = CostModel(**kw["cost"])
        if "profile" in kw:
            kw["profile"] = LatencyProfile.from_dict(kw["profile"])
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _cameras(n: int, cfg: ExperimentConfig) -> list[CameraConfig]:
    return [CameraConfig(camera_id=i, fps=cfg.fps, ingress_delay=cfg.ingress_delay) for i in range(1, n + 1)]


def _per_node_throughput(traces: Sequence[BatchTrace]) -> list[float]:
    out = []
    prev = None
    for t in traces:
        span = t.emit - (t.ingest if prev is None else prev)
        out.append(t.frame_count / span if span > 0 else 0.0)
        prev = t.emit
    return out


# --------------------------------------------------------------------------
# load stress
# --------------------------------------------------------------------------


@dataclass
class CellResult:
    node_count: int
    density: int
    latency: SummaryStats | None = None
    throughput: SummaryStats | None = None
    failed: str | None = None


@dataclass
class LoadStressResult:
    samples: list[MetricSample] = field(default_factory=list)
    cells: dict[tuple[int, int], CellResult] = field(default_factory=dict)


def run_load_stress(cfg: ExperimentConfig) -> LoadStressResult:
    """Every node plays the same recorded scenario as fast as backpressure allows.

    Perception runs once per density level; its results are replayed on
    each node of each cell, re-attributed to that node's camera.
    """
    cfg.validate()
    out = LoadStressResult()
    for density in cfg.density_levels:
        sc = build_scenario(ScenarioConfig(
            cameras=_cameras(1, cfg), duration=cfg.duration, density_level=density,
            seed=cfg.seed, feature_dim=cfg.feature_dim,
        ))
        recorded = list(run_camera(sc, 1))
        for n in cfg.node_counts:
            cell = CellResult(n, density)
            out.cells[(n, density)] = cell
            try:
                topo = Topology(cfg.topology(n, stats_period=None))
                for cid in range(1, n + 1):
                    topo.add_node(cid, [r.retarget(cid) for r in recorded], source=FILE)
                topo.run()
            except Exception as exc:  # a crashed cell must not end the sweep
                log.error("cell (%d nodes, density %d) failed: %s", n, density, exc)
                cell.failed = repr(exc)
                continue
            lat_by_batch: dict[int, list[float]] = {}
            thr_by_batch: dict[int, list[float]] = {}
            for node in topo.nodes:
                for t, thr in zip(node.traces, _per_node_throughput(node.traces)):
                    lat_by_batch.setdefault(t.batch_index, []).append(t.latency)
                    thr_by_batch.setdefault(t.batch_index, []).append(thr)
                    out.samples.append(MetricSample(
                        "load_stress", n, density, t.batch_index, t.latency, thr, t.n_detections, t.emit,
                    ))
            order = sorted(lat_by_batch)
            cell.latency = summarize_middle([float(np.mean(lat_by_batch[b])) for b in order],
                                            cfg.warmup_batches, cfg.cooldown_batches)
            cell.throughput = summarize_middle([float(np.mean(thr_by_batch[b])) for b in order],
                                               cfg.warmup_batches, cfg.cooldown_batches)
    return out


# --------------------------------------------------------------------------
# endurance
# --------------------------------------------------------------------------


def diurnal_schedule(duration: float, peak: int = 9, trough: int = 1, step: float = 600.0) -> list[list[float]]:
    """Piecewise-constant daily curve with one peak in the middle of the run."""
    out = []
    t = 0.0
    while t < duration:
        phase = (t + step / 2) / duration
        level = trough + (peak - trough) * math.sin(math.pi * phase) ** 2
        out.append([t, int(round(level))])
        t += step
    return out


@dataclass
class EnduranceResult:
    samples: dict[int, list[MetricSample]] = field(default_factory=dict)
    resets: dict[int, list[dict]] = field(default_factory=dict)
    rows_ingested: dict[int, int] = field(default_factory=dict)
    batches: dict[int, int] = field(default_factory=dict)
    id_counter: dict[int, list[int]] = field(default_factory=dict)


def _bin_samples(traces: Sequence[BatchTrace], n: int, period: float, density_of, duration: float) -> list[MetricSample]:
    bins = max(1, int(math.ceil(duration / period)))
    lat = [[] for _ in range(bins)]
    det = [[] for _ in range(bins)]
    frames = [0] * bins
    for t in traces:
        i = min(int(t.start_time // period), bins - 1)
        lat[i].append(t.latency)
        det[i].append(t.n_detections / t.frame_count)
        frames[i] += t.frame_count
    out = []
    for i in range(bins):
        if not lat[i]:
            continue
        out.append(MetricSample(
            "endurance", n, density_of(i * period), i,
            math.fsum(lat[i]) / len(lat[i]), frames[i] / period / n,
            int(round(math.fsum(det[i]) / len(det[i]))), i * period,
        ))
    return out


def run_endurance(cfg: ExperimentConfig) -> EnduranceResult:
    """Continuous operation with per-period averaged samples and database resets.

    Perception is summarized straight from the scenario ground truth one
    keyframe per batch, which keeps multi-day runs tractable.  Samples are
    binned by the capture time of each batch.
    """
    cfg.validate()
    schedule = cfg.density_schedule
    if schedule is None:
        schedule = diurnal_schedule(cfg.duration, peak=max(cfg.density_levels))
    out = EnduranceResult()
    for n in cfg.node_counts:
        sc = build_scenario(ScenarioConfig(
            cameras=_cameras(n, cfg), duration=cfg.duration, density_level=schedule,
            seed=cfg.seed, feature_dim=cfg.feature_dim,
        ))
        sched1 = sc.config.schedule_for(1)

        def density_of(t: float, sched=sched1) -> int:
            level = sched[0][1]
            for t0, d in sched:
                if t0 <= t:
                    level = d
            return level

        streams = [GroundTruthSummarizer(sc, cid, cfg.batch_size) for cid in sc.camera_ids]
        topo_cfg = cfg.topology(n, stats_period=None)
        counter: list[int] = []
        if cfg.engine == "analytic":
            run = run_analytic([(s, cfg.source, cfg.ingress_delay) for s in streams], topo_cfg, node_count=n)
            server, traces = run.server, run.traces
        else:
            topo = Topology(topo_cfg)
            for cid, s in zip(sc.camera_ids, streams):
                topo.add_node(cid, s, source=cfg.source, ingress_delay=cfg.ingress_delay)
            topo.run()
            server, traces = topo.server, list(topo.batch_traces())
        for e in server.resets:
            counter.append(e["next_global_id"])
        counter.append(server.gallery.next_id)
        out.samples[n] = _bin_samples(traces, n, cfg.sample_period, density_of, cfg.duration)
        out.resets[n] = server.resets
        out.rows_ingested[n] = server.ingested
        out.batches[n] = len(traces)
        out.id_counter[n] = counter
    return out


# --------------------------------------------------------------------------
# notification latency (physical appearance -> subscriber receipt)
# --------------------------------------------------------------------------


@dataclass
class Decomposition:
    """Per-hop breakdown of one delivered event, in virtual seconds."""

    capture: float  # appearance until the triggering batch's last frame
    ingress: float
    pipeline: float
    server: float
    links: float
    fanout: float

    @property
    def total(self) -> float:
        return self.capture + self.ingress + self.pipeline + self.server + self.links + self.fanout


@dataclass
class PcpResult:
    samples: list[PcpSample] = field(default_factory=list)
    stats: dict[tuple[str, int], SummaryStats] = field(default_factory=dict)
    decompositions: list[tuple[PcpSample, Decomposition]] = field(default_factory=list)

    @property
    def lost(self) -> list[PcpSample]:
        return [s for s in self.samples if s.lost]

    def decomposition_errors(self) -> list[float]:
        return [abs(s.pcp_latency - d.total) / s.pcp_latency for s, d in self.decompositions]


def _event_times(cfg: ExperimentConfig) -> list[float]:
    rng = np.random.default_rng([cfg.seed, 0x9C9])
    lo, hi = cfg.event_window
    return [float(t) for t in rng.uniform(lo, hi, size=cfg.runs)]


def run_pcp(cfg: ExperimentConfig) -> PcpResult:
    """One injected event per run on camera 1 while the other cameras carry background load.

    Event times are drawn once per run index and reused at every node count,
    and background cameras do not depend on the event, so their perception
    is computed once and replayed.
    """
    cfg.validate()
    out = PcpResult()
    times = _event_times(cfg)
    duration = cfg.event_window[1] + cfg.behavior_duration + 10.0
    n_max = max(cfg.node_counts)
    cams = _cameras(n_max, cfg)
    base = ScenarioConfig(cameras=cams, duration=duration, density_level=2, seed=cfg.seed,
                          feature_dim=cfg.feature_dim, detector_noise=DetectorNoise())
    background = build_scenario(base)
    bg_results = {cid: list(run_camera(background, cid)) for cid in range(2, n_max + 1)}
    for kind in cfg.anomaly_kind:
        for r, t in enumerate(times):
            ev = _make_event(cfg, kind, r, t)
            sc = build_scenario(replace(base, cameras=cams[:1], events=(ev,)))
            own = list(run_camera(sc, 1))
            for n in cfg.node_counts:
                _pcp_cell(cfg, out, kind, n, r, ev, own, bg_results)
    for kind in cfg.anomaly_kind:
        for n in cfg.node_counts:
            vals = [s.pcp_latency for s in out.samples
                    if s.anomaly_kind == kind and s.node_count == n and not s.lost]
            if vals:
                out.stats[(kind, n)] = summarize(vals)
    return out


def _make_event(cfg: ExperimentConfig, kind: str, run: int, t: float) -> GroundTruthEvent:
    if kind == "object":
        return GroundTruthEvent(f"object-{run}", OBJECT_ANOMALY, 1, t, cfg.object_duration, cfg.object_class)
    return GroundTruthEvent(f"behavior-{run}", BEHAVIOR_ANOMALY, 1, t, cfg.behavior_duration, None)


def _pcp_cell(cfg, out: PcpResult, kind: str, n: int, run: int, ev: GroundTruthEvent,
              own: list[BatchResult], bg: dict[int, list[BatchResult]]) -> None:
    tcfg = cfg.topology(n)
    topo = Topology(tcfg)
    topo.add_node(1, [b.retarget() for b in own], source=LIVE, ingress_delay=cfg.ingress_delay)
    for cid in range(2, n + 1):
        topo.add_node(cid, [b.retarget() for b in bg[cid]], source=LIVE, ingress_delay=cfg.ingress_delay)
    endpoints = [f"subscriber-{i + 1}" for i in range(cfg.subscribers)]
    for ep in endpoints:
        topo.add_subscriber(ep, "anomaly/*")
    topo.run()
    topic = object_topic(cfg.object_class) if kind == "object" else BEHAVIOR_TOPIC
    origin = ev.appearance_time
    traces = {(t.camera_id, t.batch_index): t for t in topo.batch_traces()}
    decomp = _decompose(cfg, tcfg, topo, kind, origin, traces)
    for ep in endpoints:
        hits = [r for r in topo.subscribers[ep].receipts
                if r.topic == topic and r.camera_id == 1 and r.receipt_time >= origin]
        first = min(hits, key=lambda r: r.receipt_time) if hits else None
        lost = first is None or first.receipt_time - origin > cfg.timeout
        s = PcpSample(kind, n, run, ev.event_id, ep, origin, None if lost else first.receipt_time, lost)
        out.samples.append(s)
        if not lost and decomp is not None:
            out.decompositions.append((s, decomp))


def _decompose(cfg, tcfg: TopologyConfig, topo: Topology, kind: str, origin: float, traces) -> Decomposition | None:
    """Predict the latency from configured delays plus the measured stage and server times."""
    fanout = tcfg.profile.fanout(topo.node_count)
    if kind == "object":
        hits = [a for a in topo.alerts if a.camera_id == 1 and a.enqueue is not None and a.origin_time >= origin - 1e-9]
        if not hits:
            return None
        a = min(hits, key=lambda a: a.handoff)
        tr = traces[(1, a.batch_index)]
        ready = tr.last_frame_time + cfg.ingress_delay
        return Decomposition(tr.last_frame_time - origin, cfg.ingress_delay, a.handoff - ready, 0.0,
                             tcfg.node_to_cloud.delay, fanout)
    hits = [nt for nt in topo.notifications if nt.camera_id == 1 and nt.publish is not None]
    if not hits:
        return None
    nt = min(hits, key=lambda x: x.publish)
    tr = traces[(1, nt.batch_index)]
    ready = tr.last_frame_time + cfg.ingress_delay
    return Decomposition(
        tr.last_frame_time - origin, cfg.ingress_delay, tr.emit - ready,
        tr.server_done - tr.server_arrival, tcfg.node_to_server.delay + tcfg.server_to_cloud.delay, fanout,
    )
