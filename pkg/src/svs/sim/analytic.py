"""Closed-form timing of the node pipelines and the server intake queue.

A chain of single-server stages with bounded buffers and blocking after
service obeys a max-plus recursion, so every timestamp the event-driven
model produces can be computed directly.  This serves as the oracle for
:mod:`svs.sim.topology` and as a much faster engine for multi-day runs
(no outages, no cloud tier).
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from ..ainode.types import BatchResult
from ..server.node import ServerNode
from .topology import FILE, LIVE, BatchTrace, TopologyConfig


def node_timeline(
    results: Iterable[BatchResult],
    config: TopologyConfig,
    node_count: int,
    source: str = FILE,
    ingress_delay: float = 3.0,
) -> Iterator[tuple[BatchResult, BatchTrace]]:
    """Per-batch timestamps for one node, computed batch by batch.

    Stage ``k`` starts batch ``b`` once the batch has been handed over and
    the stage has handed on batch ``b-1``; a stage holds a finished batch
    until the next stage has taken batch ``b-C`` (its buffer is full until
    then).  The source is held the same way by stage 0.
    """
    cost = config.cost
    K, C = len(cost.stages), config.queue_capacity
    starts: deque[list[float]] = deque(maxlen=C)
    free = [0.0] * K
    entered_prev = 0.0
    link = config.node_to_server.delay
    arrival_prev = float("-inf")
    for res in results:
        s_time = cost.stage_time(res.detections_per_frame, node_count)
        a = entered_prev if source == FILE else res.last_frame_time + ingress_delay
        oldest = starts[0] if len(starts) == C else None
        entered = a if oldest is None else max(a, oldest[0])
        if source == LIVE:
            entered = max(entered, entered_prev)
        entered_prev = entered
        st, fin = [0.0] * K, [0.0] * K
        for k in range(K):
            s = max(entered, free[k])
            f = s + s_time
            st[k], fin[k] = s, f
            done = f
            if k + 1 < K and oldest is not None:
                done = max(f, oldest[k + 1])
            free[k] = done
            entered = done
        starts.append(st)
        trace = BatchTrace(res.camera_id, res.batch_index, res.frame_count, res.n_detections,
                           res.start_time, res.last_frame_time, ingest=a, stage_done=fin, emit=fin[-1],
                           records=len(res.records))
        trace.server_arrival = max(trace.emit, arrival_prev) + link
        arrival_prev = trace.server_arrival
        yield res, trace


@dataclass
class AnalyticRun:
    server: ServerNode
    traces: list[BatchTrace] = field(default_factory=list)
    notifications: int = 0


def run_analytic(
    nodes: Sequence[tuple[Iterable[BatchResult], str, float]],
    config: TopologyConfig = TopologyConfig(),
    node_count: int | None = None,
    keep_traces: bool = True,
    on_trace=None,
) -> AnalyticRun:
    """Run nodes ``(results, source, ingress_delay)`` into one server without an event loop.

    Batches reach the server in arrival order; the server serves them one
    at a time and resets exactly at each uptime deadline.
    """
    n = node_count or len(nodes)
    server = ServerNode(config.server, start_time=0.0)
    run = AnalyticRun(server)
    streams = [
        ((tr.server_arrival, i, tr.batch_index, res, tr) for res, tr in node_timeline(r, config, n, src, ing))
        for i, (r, src, ing) in enumerate(nodes)
    ]
    busy = 0.0
    for arrival, _, _, res, tr in heapq.merge(*streams, key=lambda x: (x[0], x[1], x[2])):
        done = max(arrival, busy) + config.server_ingest
        while server.next_reset_deadline() <= done:
            server.maybe_reset(server.next_reset_deadline())
        busy = done
        tr.server_done = done
        for rec in res.records:
            if server.ingest(rec, done).notification is not None:
                run.notifications += 1
        if on_trace is not None:
            on_trace(tr)
        if keep_traces:
            run.traces.append(tr)
    return run
