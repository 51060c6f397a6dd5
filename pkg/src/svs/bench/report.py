"""CSV and text renderings of experiment output."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from .metrics import MetricSample, PcpSample, SummaryStats, summarize, summarize_middle

METRIC_COLUMNS = ("experiment", "node_count", "density", "batch", "latency_s", "throughput_fps", "detections", "ts")
PCP_COLUMNS = ("anomaly_kind", "node_count", "run", "event_id", "subscriber_id",
               "origin_time", "receipt_time", "pcp_latency", "lost")

HEADER = (
    "# Virtual-time results from the synthetic cost model. Absolute values do not\n"
    "# reflect any hardware; only trends and relative structure are meaningful.\n"
)


def _num(v: float, places: int = 6) -> str:
    return f"{v:.{places}f}"


def _density(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else _num(v, 3)


def metric_rows(samples: Iterable[MetricSample]) -> list[list[str]]:
    return [
        [s.experiment, str(s.node_count), _density(s.density), str(s.batch), _num(s.latency_s),
         _num(s.throughput_fps, 4), str(s.detections), _num(s.ts)]
        for s in samples
    ]


def pcp_rows(samples: Iterable[PcpSample]) -> list[list[str]]:
    out = []
    for s in samples:
        lat = s.pcp_latency
        out.append([s.anomaly_kind, str(s.node_count), str(s.run), s.event_id, s.subscriber_id,
                    _num(s.origin_time), "" if s.receipt_time is None else _num(s.receipt_time),
                    "" if lat is None else _num(lat), str(int(s.lost))])
    return out


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    path.write_text(buf.getvalue())
    return path


def write_metrics(path: str | Path, samples: Iterable[MetricSample]) -> Path:
    return write_csv(path, METRIC_COLUMNS, metric_rows(samples))


def write_pcp(path: str | Path, samples: Iterable[PcpSample]) -> Path:
    return write_csv(path, PCP_COLUMNS, pcp_rows(samples))


def write_long(path: str | Path, samples: Iterable[MetricSample]) -> Path:
    """One row per (sample, metric): convenient for plotting libraries."""
    rows = []
    for r in metric_rows(samples):
        exp, n, d, b = r[:4]
        for name, value in (("latency_s", r[4]), ("throughput_fps", r[5]), ("detections", r[6])):
            rows.append([exp, n, d, b, name, value])
    return write_csv(path, ("experiment", "node_count", "density", "batch", "metric", "value"), rows)


def _table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h)) for i, h in enumerate(headers)]
    line = "  ".join(str(h).rjust(w) for h, w in zip(headers, widths))
    body = ["  ".join(str(c).rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join([line, "  ".join("-" * w for w in widths), *body])


def cell_summary_table(cells: dict[tuple[int, float], tuple[SummaryStats, SummaryStats]]) -> str:
    rows = []
    for (n, d), (lat, thr) in sorted(cells.items()):
        rows.append([n, _density(d), f"{lat.mean:.3f}", f"{lat.std:.3f}", f"{thr.mean:.2f}", f"{thr.mean * n:.2f}"])
    return _table(["nodes", "density", "latency_s", "latency_sd", "fps/node", "fps/system"], rows)


def pcp_tables(stats: dict[tuple[str, int], SummaryStats]) -> str:
    """Mean latency per node count and kind, then min/max/sd per (kind, nodes)."""
    kinds = sorted({k for k, _ in stats}, key=lambda k: (k != "object", k))
    nodes = sorted({n for _, n in stats})
    means = [[n, *(f"{stats[(k, n)].mean:.2f}" if (k, n) in stats else "-" for k in kinds)] for n in nodes]
    detail = [
        [k, n, f"{s.mean:.2f}", f"{s.min:.2f}", f"{s.max:.2f}", f"{s.std:.2f}", s.count]
        for k in kinds for n in nodes if (s := stats.get((k, n))) is not None
    ]
    return (
        "Mean end-to-end notification latency (s)\n"
        + _table(["nodes", *kinds], means)
        + "\n\nDistribution (s)\n"
        + _table(["kind", "nodes", "mean", "min", "max", "sd", "n"], detail)
    )


def read_csv(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        return list(r.fieldnames or []), list(r)


def summarize_file(path: str | Path, warmup: int = 0, cooldown: int = 0) -> str:
    """Text summary of a metrics or notification-latency CSV written by this module."""
    cols, rows = read_csv(path)
    if tuple(cols) == PCP_COLUMNS:
        vals: dict[tuple[str, int], list[float]] = defaultdict(list)
        lost = 0
        for r in rows:
            if r["lost"] == "1":
                lost += 1
                continue
            vals[(r["anomaly_kind"], int(r["node_count"]))].append(float(r["pcp_latency"]))
        text = pcp_tables({k: summarize(v) for k, v in vals.items()})
        return HEADER + text + (f"\n\nlost: {lost}" if lost else "")
    if tuple(cols) != METRIC_COLUMNS:
        raise ValueError(f"unrecognized columns in {path}: {cols}")
    lat: dict[tuple[int, float], dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    thr: dict[tuple[int, float], dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        key = (int(r["node_count"]), float(r["density"]))
        b = int(r["batch"])
        lat[key][b].append(float(r["latency_s"]))
        thr[key][b].append(float(r["throughput_fps"]))
    cells = {}
    for key in lat:
        order = sorted(lat[key])
        lv = [sum(lat[key][b]) / len(lat[key][b]) for b in order]
        tv = [sum(thr[key][b]) / len(thr[key][b]) for b in order]
        cells[key] = (summarize_middle(lv, warmup, cooldown), summarize_middle(tv, warmup, cooldown))
    return HEADER + cell_summary_table(cells)
