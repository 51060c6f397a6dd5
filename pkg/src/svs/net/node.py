"""An AI node that streams one scenario camera to live server and cloud services."""

from __future__ import annotations

import asyncio
import logging
import time
from collections import deque
from dataclasses import dataclass, field

from ..ainode.batching import Batcher
from ..ainode.pipeline import CostModel, PipelineConfig, reference_pipeline
from ..cloud.messages import NotificationMessage
from ..scene import Scenario
from ..transport import Message
from .client import Peer

log = logging.getLogger(__name__)


@dataclass
class NodeReport:
    batches: int = 0
    records: int = 0
    alerts: int = 0
    dead_letters: list[dict] = field(default_factory=list)
    spilled: int = 0
    replayed: int = 0


async def run_ai_node(
    scenario: Scenario,
    camera_id: int,
    server: str,
    cloud: str | None = None,
    config: PipelineConfig = PipelineConfig(),
    speed: float = 1.0,
    cost: CostModel | None = CostModel(),
    node_count: int = 1,
) -> NodeReport:
    """Play ``camera_id`` in real time divided by ``speed``.

    Scenario times are shifted onto the wall clock at start-up, so records
    and alerts carry absolute timestamps.  Alerts leave right after the
    detection stage; a record batch that cannot be delivered joins a local
    spill queue that is drained, in order, before the next batch.
    """
    cam = scenario.camera(camera_id)
    pipeline = reference_pipeline(scenario, camera_id, config)
    batcher = Batcher(camera_id, config.batch_size, cam.fps)
    srv = Peer(server)
    cld = Peer(cloud) if cloud else None
    spill: deque[list] = deque()  # [body, was_spilled]
    report = NodeReport()
    rest = len(cost.stages) - 1 if cost is not None else 0
    t0 = time.time()

    def wall(t: float) -> float:
        return t0 + t / speed

    async def stage(n: int, dpf: float) -> None:
        if cost is not None:
            await asyncio.sleep(n * cost.stage_time(dpf, node_count) / speed)

    async def push_records() -> None:
        while spill:
            entry = spill[0]
            try:
                await srv.request(Message("record", time.time(), entry[0]))
            except ConnectionError as exc:
                for e in spill:
                    if not e[1]:
                        e[1] = True
                        report.spilled += 1
                log.warning("server unreachable, %d batches spilled: %s", len(spill), exc)
                return
            spill.popleft()
            report.replayed += entry[1]

    async def send_alert(note: NotificationMessage) -> None:
        if cld is None:
            return
        note.publish_time = max(time.time(), note.origin_time)
        try:
            await cld.request(Message("object_alert", time.time(), note.to_dict()))
            report.alerts += 1
        except ConnectionError as exc:
            report.dead_letters.append(note.to_dict())
            log.error("alert dead-lettered: %s", exc)

    try:
        for frame in scenario.frames(camera_id):
            batch = batcher.push(frame)
            if batch is None:
                continue
            ready = wall(batch.last_frame_time + cam.ingress_delay)
            delay = ready - time.time()
            if delay > 0:
                await asyncio.sleep(delay)
            result = pipeline.process(batch)
            if result is None:
                continue
            await stage(1, result.detections_per_frame)
            for note in result.alerts:
                note.origin_time = wall(note.origin_time)
                await send_alert(note)
            await stage(rest, result.detections_per_frame)
            report.batches += 1
            if not result.records:
                continue
            for r in result.records:
                r.record_time = round(wall(r.record_time), 3)
            report.records += len(result.records)
            spill.append([{"records": [r.to_dict() for r in result.records]}, False])
            await push_records()
        await push_records()
    finally:
        await srv.close()
        if cld is not None:
            await cld.close()
    return report
