import itertools

import pytest
from hypothesis import given, strategies as st

from svs.server.confirm import BehaviorConfirmer, confirm_scores

from oracles import count_runs


def test_exhaustive_length_ten():
    for bits in itertools.product([True, False], repeat=10):
        scores = [5.0 if b else 35.0 for b in bits]
        fired = confirm_scores(scores)
        assert len(fired) == count_runs(bits, 3)
        # each notification fires on the third score of its run
        for i in fired:
            assert bits[i - 2] and bits[i - 1] and bits[i]
            assert i < 3 or not bits[i - 3]


@given(st.lists(st.one_of(st.none(), st.floats(-100, 40)), max_size=40), st.integers(1, 5))
def test_runs_property(scores, k):
    flags = [s is not None and s < 20 for s in scores]
    # a None score is skipped rather than ending the run
    compact = [f for s, f in zip(scores, flags) if s is not None]
    assert len(confirm_scores(scores, 20.0, k)) == count_runs(compact, k)


def test_threshold_is_strict():
    assert confirm_scores([19.99] * 3) == [2]
    assert confirm_scores([20.0] * 5) == []


def test_message_contents():
    c = BehaviorConfirmer()
    assert c.observe(4, 10.0, 12.0) is None
    assert c.observe(4, 10.0, 12.0) is None  # same keyframe, ignored
    assert c.observe(4, 11.0, 13.0) is None
    m = c.observe(4, 12.0, 11.0)
    assert m.topic == "anomaly/behavior" and m.origin_time == 10.0 and m.camera_id == 4
    assert m.body["scores"] == [12.0, 13.0, 11.0] and m.body["confirmed_at"] == 12.0
    assert m.path == ["ai-node:4", "server"]
    assert c.observe(4, 13.0, 1.0) is None
    assert c.observe(4, 14.0, 39.0) is None
    assert [c.observe(4, t, 0.0) is not None for t in (15.0, 16.0, 17.0)] == [False, False, True]


def test_cameras_are_independent():
    c = BehaviorConfirmer()
    out = [c.observe(cam, t, 1.0) for t in (1.0, 2.0, 3.0) for cam in (1, 2)]
    assert [m.camera_id for m in out if m is not None] == [1, 2]


def test_bad_run_length():
    with pytest.raises(ValueError):
        BehaviorConfirmer(run_length=0)
