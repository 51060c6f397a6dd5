import asyncio
import csv
import time

import numpy as np
import pytest

from svs.ainode.pipeline import PipelineConfig
from svs.cloud.messages import NotificationMessage
from svs.errors import SubscriptionRejected
from svs.net.client import Peer
from svs.net.cloud import CloudService
from svs.net.node import run_ai_node
from svs.net.notify import run_subscriber
from svs.net.server import ServerService
from svs.scene import BEHAVIOR_ANOMALY, OBJECT_ANOMALY, CameraConfig, GroundTruthEvent, ScenarioConfig, build_scenario
from svs.server.records import MetadataRecord
from svs.transport import Message


def addr(server: asyncio.AbstractServer) -> str:
    return "127.0.0.1:%d" % server.sockets[0].getsockname()[1]


def run(coro):
    return asyncio.run(asyncio.wait_for(coro, 60))


def test_end_to_end_over_localhost(tmp_path):
    async def main():
        cloud = CloudService()
        cs = await cloud.serve("127.0.0.1:0")
        srv = ServerService(cloud=addr(cs), stats_period=None, tick=0.1)
        ss = await srv.serve("127.0.0.1:0")
        ready = asyncio.Event()
        log = tmp_path / "notify.csv"
        sub = asyncio.create_task(run_subscriber(addr(cs), "anomaly/*", log, "phone", count=3, timeout=20, ready=ready))
        await ready.wait()
        cfg = ScenarioConfig(cameras=[CameraConfig(1, ingress_delay=0.0)], duration=20, density_level=2, events=[
            GroundTruthEvent("o1", OBJECT_ANOMALY, 1, 3.0, 2.0, "knife"),
            GroundTruthEvent("b1", BEHAVIOR_ANOMALY, 1, 8.0, 6.0, None)])
        sc = build_scenario(cfg)
        t0 = time.time()
        rep = await run_ai_node(sc, 1, addr(ss), addr(cs), PipelineConfig(anomaly_classes=dict(cfg.anomaly_classes)),
                                speed=20.0)
        rows = await sub
        await srv.close()
        cs.close()
        ss.close()
        return t0, rep, rows, srv, log

    t0, rep, rows, srv, log = run(main())
    assert rep.batches == 20 and not rep.dead_letters and rep.alerts == 2
    topics = [r[0] for r in rows]
    assert topics.count("anomaly/object/knife") == 2 and "anomaly/behavior" in topics
    assert all(recv >= origin for _, origin, recv in rows)
    assert srv.node.row_count == rep.records
    with open(log) as fh:
        assert len(list(csv.reader(fh))) == 4


def test_server_acks_records_with_global_ids():
    async def main():
        srv = ServerService(stats_period=None)
        ss = await srv.serve("127.0.0.1:0")
        peer = Peer(addr(ss))
        good = MetadataRecord(1.0, 1, 0, (0, 0, 5, 5), feature=np.ones(4), local_id=1).to_dict()
        bad = MetadataRecord(1.0, 1, 0, (0, 0, 5, 5), feature=np.zeros(4)).to_dict()
        reply = await peer.request(Message("record", 1.0, {"records": [good, bad, good]}))
        stats = await peer.request(Message("stats", 2.0, {"t0": 0.0, "t1": 2.0}))
        await peer.close()
        await srv.close()
        ss.close()
        return reply, stats

    reply, stats = run(main())
    assert reply.body["ok"] and reply.body["global_ids"] == [1001, 1001]
    assert len(reply.body["rejected"]) == 1 and reply.body["rows"] == 2
    assert stats.body["headcount"] == {"1": 1}


def test_cloud_tables_and_routing_over_socket():
    async def main():
        cloud = CloudService()
        cs = await cloud.serve("127.0.0.1:0")
        peer = Peer(addr(cs))
        put = await peer.request(Message("put", 0.0, {"table": "tracking", "camera_id": 1, "timestamp": 5.0,
                                                      "value": {"n": 2}}))
        got = await peer.request(Message("get", 0.0, {"table": "tracking", "camera_id": 1, "timestamp": 5.0}))
        bad = await peer.request(Message("get", 0.0, {"table": "nope", "camera_id": 1, "timestamp": 5.0}))
        note = NotificationMessage("anomaly/object/gun", time.time(), 1, body={"path": ["ai-node:1"]})
        routed = await peer.request(Message("object_alert", 0.0, note.to_dict()))
        await peer.close()
        cs.close()
        return put, got, bad, routed

    put, got, bad, routed = run(main())
    assert put.body["ok"] and got.body["value"] == {"n": 2}
    assert not bad.body["ok"] and "unknown table" in bad.body["reason"]
    assert routed.body["routed"] == 0


def test_bad_subscription_is_rejected():
    async def main():
        cs = await CloudService().serve("127.0.0.1:0")
        try:
            await run_subscriber(addr(cs), "anomaly/obj*", timeout=5)
        finally:
            cs.close()

    with pytest.raises(SubscriptionRejected):
        run(main())


def test_peer_gives_up_after_retries():
    async def main():
        peer = Peer("127.0.0.1:1", attempts=3, backoff=0.05)
        t = time.monotonic()
        with pytest.raises(ConnectionError):
            await peer.request(Message("ack", 0.0, {}))
        return time.monotonic() - t

    assert run(main()) >= 0.09
