import json
import subprocess
import sys

from svs.cli import build_parser, main


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_bench_load_stress_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path, "ls.json", {"node_counts": [1, 2], "density_levels": [0, 3], "duration": 10,
                                      "warmup_batches": 2, "cooldown_batches": 2, "feature_dim": 16})
    out = tmp_path / "out"
    assert main(["bench", "load-stress", "--config", cfg, "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"metrics.csv", "metrics_long.csv", "summary.txt"}
    text = capsys.readouterr().out
    assert "[PASS] per-node throughput nonincreasing in density" in text
    assert main(["report", "summary", str(out / "metrics.csv"), "--warmup", "2", "--cooldown", "2"]) == 0
    assert "fps/node" in capsys.readouterr().out


def test_bench_pcp_and_endurance(tmp_path, capsys):
    pcp = write(tmp_path, "p.json", {"kind": "pcp", "node_counts": [1, 2], "runs": 1, "feature_dim": 16})
    assert main(["bench", "pcp", "--config", pcp, "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "pcp.csv").exists()
    end = write(tmp_path, "e.json", {"kind": "endurance", "node_counts": [1], "duration": 7200,
                                     "feature_dim": 16, "reset_hours": 1})
    assert main(["bench", "endurance", "--config", end, "--out", str(tmp_path / "e")]) == 0
    lines = (tmp_path / "e" / "resets.ndjson").read_text().splitlines()
    assert [json.loads(x)["reason"] for x in lines] == ["uptime", "uptime"]


def test_bench_exits_nonzero_on_failed_check(tmp_path, capsys):
    # with zero contention, latency cannot grow with node count
    cfg = write(tmp_path, "p.json", {"kind": "pcp", "node_counts": [1, 2], "runs": 1, "feature_dim": 16,
                                     "anomaly_kind": ["object"], "cost": {"contention": 0.0}})
    assert main(["bench", "pcp", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "[FAIL] object mean increases with node count" in capsys.readouterr().out


def test_bad_config_reports_error(tmp_path, capsys):
    cfg = write(tmp_path, "x.json", {"kind": "pcp", "warp": 9})
    assert main(["bench", "pcp", "--config", cfg]) == 2
    assert "svs: error" in capsys.readouterr().err
    cfg = write(tmp_path, "y.json", {"kind": "endurance"})
    assert main(["bench", "pcp", "--config", cfg]) == 2


def test_parser_defaults():
    p = build_parser()
    a = p.parse_args(["serve", "--listen", ":7000"])
    assert (a.reset_rows, a.reset_hours, a.theta, a.tau) == (50_000, 24.0, 0.7, 20.0)
    n = p.parse_args(["ai-node", "--camera", "3", "--scenario", "s.json", "--server", ":1"])
    assert (n.batch, n.window, n.stride) == (30, 30, 20)
    assert p.parse_args(["notify", "--connect", ":1"]).pattern == "anomaly/*"


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "svs.cli", "--help"], capture_output=True, text=True, check=True)
    for cmd in ("ai-node", "serve", "cloud", "notify", "bench", "report"):
        assert cmd in out.stdout
