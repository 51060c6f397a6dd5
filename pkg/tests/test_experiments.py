import json

import pytest

from svs.bench.checks import check_endurance, check_load_stress, check_pcp
from svs.bench.experiments import (
    ExperimentConfig,
    diurnal_schedule,
    run_endurance,
    run_load_stress,
    run_pcp,
)
from svs.errors import ConfigError


def test_config_validation_and_loading(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="warp").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(node_counts=(17,)).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(duration=10).validate()  # too short for 25 + 25 batches
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"nodes": 3})
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"kind": "pcp", "node_counts": [4, 8], "cost": {"base_ms": 10},
                                "profile": {"notify_fanout": {"4": 1.0}}}))
    cfg = ExperimentConfig.load(path)
    assert cfg.node_counts == (4, 8) and cfg.cost.base_ms == 10 and cfg.profile.fanout_ms(8) == 1.0


def test_small_load_stress_trends():
    cfg = ExperimentConfig(node_counts=(1, 4), density_levels=(0, 5), duration=20, warmup_batches=2,
                           cooldown_batches=2, feature_dim=32)
    res = run_load_stress(cfg)
    assert all(c.ok for c in check_load_stress(res))
    assert len(res.samples) == (1 + 4) * 2 * 20
    lat = {k: c.latency.mean for k, c in res.cells.items()}
    assert lat[(4, 5)] > lat[(1, 5)] > lat[(1, 0)]


def test_small_pcp():
    cfg = ExperimentConfig(kind="pcp", node_counts=(1, 4), runs=2, feature_dim=32)
    res = run_pcp(cfg)
    assert not res.lost and len(res.samples) == 2 * 2 * 2 * cfg.subscribers
    assert all(c.ok for c in check_pcp(res, cfg))
    for s in res.samples:
        assert s.pcp_latency > cfg.ingress_delay


def test_small_endurance_with_resets():
    cfg = ExperimentConfig(kind="endurance", node_counts=(2,), duration=3 * 3600.0, feature_dim=16,
                           density_schedule=[[0, 5]], reset_hours=1.0)
    res = run_endurance(cfg)
    # 2 nodes x 5 persons x 1 keyframe/s = 36,000 rows per hour, below the row cap
    checks = check_endurance(res, cfg)
    assert all(c.ok for c in checks), checks
    reasons = [e["reason"] for e in res.resets[2]]
    assert "rows" not in reasons and reasons.count("uptime") == 3  # the final batch lands after 3 h
    assert len(res.samples[2]) == 180


def test_endurance_engines_agree():
    base = dict(kind="endurance", node_counts=(2,), duration=1800.0, feature_dim=16,
                density_schedule=[[0, 4], [600, 1]], reset_rows=3000)
    a = run_endurance(ExperimentConfig(engine="analytic", **base))
    b = run_endurance(ExperimentConfig(engine="des", **base))
    assert [(e["rows"], e["time"]) for e in a.resets[2]] == \
        pytest.approx([(e["rows"], e["time"]) for e in b.resets[2]])
    assert a.samples == b.samples


def test_diurnal_schedule_peaks_midway():
    s = diurnal_schedule(86400.0, peak=9, trough=1, step=3600.0)
    levels = [lvl for _, lvl in s]
    assert len(s) == 24 and max(levels) == 9 and min(levels) == 1
    assert levels == levels[::-1] and levels[11] == levels[12] == 9
