import json

import pytest

from svs.cloud.broker import MAX_ENDPOINTS, Broker, Subscriber, parse_pattern, topic_matches
from svs.cloud.messages import BEHAVIOR_TOPIC, NotificationMessage, object_topic, valid_topic
from svs.cloud.profile import LatencyProfile
from svs.cloud.tables import CloudTables
from svs.errors import ConfigError, RequestError, SubscriptionRejected

# measured cloud latencies per node count (ms)
MEASURED = {"get": 14.6, "put": 17.5, "fanout": {4: 140.0, 8: 150.5, 12: 186.0, 16: 172.0},
            "action": 105.0, "statistical": 14.4}


def test_default_profile_matches_measurements_within_1ms():
    p = LatencyProfile()
    assert abs(p.table_get - MEASURED["get"]) <= 1 and abs(p.table_put - MEASURED["put"]) <= 1
    assert abs(p.api_action - MEASURED["action"]) <= 1 and abs(p.api_statistical - MEASURED["statistical"]) <= 1
    for n, ms in MEASURED["fanout"].items():
        assert abs(p.fanout_ms(n) - ms) <= 1.0


@pytest.mark.parametrize("n,ms", [(1, 140.0), (5, 150.5), (9, 186.0), (13, 172.0), (40, 172.0)])
def test_fanout_tier_lookup(n, ms):
    assert LatencyProfile().fanout_ms(n) == ms


def test_profile_round_trip(tmp_path):
    p = LatencyProfile(table_get=1.0, notify_fanout={2: 5.0, 6: 9.0})
    path = tmp_path / "p.json"
    path.write_text(json.dumps(p.to_dict()))
    q = LatencyProfile.load(path)
    assert q == p and q.fanout(3) == 0.009
    with pytest.raises(ConfigError):
        LatencyProfile.from_dict({"table_get": -1})
    with pytest.raises(ConfigError):
        LatencyProfile.from_dict({"sns": 1})


def test_topics():
    assert object_topic("knife") == "anomaly/object/knife"
    assert valid_topic(BEHAVIOR_TOPIC) and valid_topic("anomaly/object/gun")
    assert not valid_topic("anomaly/object") and not valid_topic("alerts/x")
    m = NotificationMessage("anomaly/object/gun", 1.0, 2, body={"path": ["a"]})
    assert NotificationMessage.from_dict(json.loads(json.dumps(m.to_dict()))) == m
    assert m.kind == "object"


@pytest.mark.parametrize("pattern,topic,ok", [
    ("anomaly/*", "anomaly/behavior", True),
    ("anomaly/*", "anomaly/object/knife", True),
    ("anomaly/object/*", "anomaly/behavior", False),
    ("anomaly/behavior", "anomaly/behavior", True),
    ("anomaly/*", "anomaly", False),
])
def test_pattern_matching(pattern, topic, ok):
    assert topic_matches(pattern, topic) is ok


@pytest.mark.parametrize("pattern", ["", "a//b", "*/x", "anomaly/obj*"])
def test_bad_patterns(pattern):
    with pytest.raises(SubscriptionRejected):
        parse_pattern(pattern)


def msg(topic="anomaly/object/knife", t=1.0):
    return NotificationMessage(topic, t, 1, body={"path": ["ai-node:1"]})


def test_publish_routes_with_fanout_delay_and_dedups_endpoints():
    b = Broker(node_count=8)
    b.subscribe("anomaly/*", "phone")
    b.subscribe("anomaly/object/*", "phone")
    b.subscribe("anomaly/behavior", "desk")
    ds = b.publish(msg(), now=2.0)
    assert [(d.subscription.endpoint, d.deliver_at) for d in ds] == [("phone", pytest.approx(2.1505))]
    assert ds[0].message.publish_time == 2.0
    assert b.publish(msg("anomaly/behavior"), 3.0)[0].subscription.endpoint == "phone"
    b2 = Broker()
    assert b2.publish(msg(), 0.0) == [] and b2.unrouted == 1


def test_fifo_per_topic_and_endpoint():
    b = Broker()
    b.subscribe("anomaly/*", "phone")
    first = b.publish(msg(), 5.0)[0]
    b.profile = LatencyProfile(notify_fanout={4: 10.0})  # a later, faster publish must not overtake
    second = b.publish(msg(), 5.01)[0]
    assert second.deliver_at >= first.deliver_at


def test_endpoint_cap():
    b = Broker()
    for i in range(MAX_ENDPOINTS):
        b.subscribe("anomaly/*", f"e{i}")
    extra = b.subscribe("anomaly/behavior", "e0")
    with pytest.raises(SubscriptionRejected):
        b.subscribe("anomaly/*", "one-too-many")
    b.unsubscribe(1)
    with pytest.raises(SubscriptionRejected):
        b.subscribe("anomaly/*", "one-too-many")
    b.unsubscribe(extra)
    b.subscribe("anomaly/*", "one-too-many")


def test_failing_endpoint_is_isolated():
    b = Broker()
    good, bad = Subscriber("good"), Subscriber("bad", connected=False)
    b.subscribe("anomaly/*", "good")
    b.subscribe("anomaly/*", "bad")
    for d in b.publish(msg(), 1.0):
        b.deliver(d, good if d.subscription.endpoint == "good" else bad)
    assert len(good.receipts) == 1 and b.failed == 1 and b.delivered == 1
    r = good.receipts[0]
    assert r.latency == pytest.approx(0.14) and r.path == ["ai-node:1"]


def test_publish_rejects_invalid_messages():
    b = Broker()
    with pytest.raises(RequestError):
        b.publish(msg("nope"), 0.0)
    m = msg(t=5.0)
    m.publish_time = 4.0
    with pytest.raises(RequestError):
        b.publish(m, 5.0)


def test_subscriber_csv(tmp_path):
    s = Subscriber("x")
    s.receive(msg(), 1.25)
    s.write_csv(tmp_path / "x.csv")
    assert (tmp_path / "x.csv").read_text().splitlines() == ["topic,origin_time,receipt_time",
                                                             "anomaly/object/knife,1.000000,1.250000"]


def test_tables_visibility_and_latency():
    t = CloudTables()
    ack = t.put_item("tracking", 1, 10.0, {"n": 1}, now=1.0)
    assert ack == pytest.approx(1.0175)
    assert t.get_item("tracking", 1, 10.0, now=1.01) == (None, pytest.approx(1.0246))
    assert t.get_item("tracking", 1, 10.0, now=1.02)[0] == {"n": 1}
    with pytest.raises(RequestError):
        t.put_item("other", 1, 0.0, {})


def test_stats_query_is_ordered_and_half_open():
    t = CloudTables()
    for ts in (3.0, 1.0, 2.0, 4.0):
        t.put_item("analytics", 7, ts, {"ts": ts}, now=0.0)
    rows, ready = t.query_stats(7, 1.0, 4.0, now=1.0)
    assert [r["timestamp"] for r in rows] == [1.0, 2.0, 3.0]
    assert ready == pytest.approx(1.0144)
    with pytest.raises(RequestError):
        t.query_stats(7, 2.0, 1.0)
