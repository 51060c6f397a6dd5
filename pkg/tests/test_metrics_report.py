import statistics

import pytest
from hypothesis import given, strategies as st

from svs.bench import report
from svs.bench.metrics import MetricSample, PcpSample, compute_throughput, summarize, summarize_middle
from svs.errors import InsufficientSamples


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60))
def test_summarize_against_statistics_module(vals):
    s = summarize(vals)
    assert s.count == len(vals) and s.min == min(vals) and s.max == max(vals)
    assert s.mean == pytest.approx(statistics.fmean(vals), rel=1e-9, abs=1e-6)
    assert s.std == (pytest.approx(statistics.stdev(vals), rel=1e-6, abs=1e-6) if len(vals) > 1 else 0.0)


@given(st.lists(st.floats(-1e3, 1e3), max_size=60), st.integers(0, 30), st.integers(0, 30))
def test_middle_slice(vals, w, c):
    if w + c >= len(vals):
        with pytest.raises(InsufficientSamples):
            summarize_middle(vals, w, c)
    else:
        assert summarize_middle(vals, w, c) == summarize(vals[w:len(vals) - c])


def test_middle_rejects_negative():
    with pytest.raises(ValueError):
        summarize_middle([1, 2, 3], -1, 0)
    with pytest.raises(InsufficientSamples):
        summarize([])


def test_throughput():
    assert compute_throughput([300, 150], 10.0) == (45.0, 22.5)
    assert compute_throughput([], 1.0) == (0.0, 0.0)
    with pytest.raises(ValueError):
        compute_throughput([1], 0)


def samples():
    return [MetricSample("load_stress", n, d, b, 0.1 * (b + 1) * n, 30.0 / n, 3, b * 1.0)
            for n in (1, 2) for d in (0, 1) for b in range(6)]


def test_metrics_csv_is_fixed_format(tmp_path):
    p = report.write_metrics(tmp_path / "m.csv", samples())
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(report.METRIC_COLUMNS)
    assert lines[1] == "load_stress,1,0,0,0.100000,30.0000,3,0.000000"
    long = report.write_long(tmp_path / "l.csv", samples()).read_text().splitlines()
    assert len(long) == 1 + 3 * len(samples())


def test_summary_of_written_metrics(tmp_path):
    p = report.write_metrics(tmp_path / "m.csv", samples())
    text = report.summarize_file(p, warmup=1, cooldown=1)
    assert text.startswith(report.HEADER)
    row = next(line for line in text.splitlines() if line.split()[:2] == ["2", "1"])
    # batches 1..4 at 2 nodes: latency 0.2 * (b + 1)
    assert row.split()[2] == "0.700"


def test_pcp_csv_and_summary(tmp_path):
    ss = [PcpSample("object", 4, r, f"o{r}", "s1", 1.0, 5.0 + r) for r in range(3)]
    ss.append(PcpSample("behavior", 4, 0, "b0", "s1", 1.0, None, lost=True))
    p = report.write_pcp(tmp_path / "p.csv", ss)
    assert p.read_text().splitlines()[-1] == "behavior,4,0,b0,s1,1.000000,,,1"
    text = report.summarize_file(p)
    assert "lost: 1" in text and "5.00" in text


def test_unknown_csv(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        report.summarize_file(tmp_path / "x.csv")
