"""Properties each experiment checks on its own output."""

from __future__ import annotations

from dataclasses import dataclass

from ..ainode.pipeline import PipelineConfig
from .experiments import EnduranceResult, ExperimentConfig, LoadStressResult, PcpResult


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""


def check_load_stress(res: LoadStressResult) -> list[Check]:
    out = []
    failed = [k for k, c in res.cells.items() if c.failed]
    out.append(Check("no failed cells", not failed, f"failed: {failed}" if failed else ""))
    nodes = sorted({n for n, _ in res.cells})
    dens = sorted({d for _, d in res.cells})
    ok_cells = {k: c for k, c in res.cells.items() if not c.failed}
    bad_thr, bad_lat = [], []
    for n in nodes:
        row = [ok_cells[(n, d)] for d in dens if (n, d) in ok_cells]
        for a, b in zip(row, row[1:]):
            if b.throughput.mean > a.throughput.mean:
                bad_thr.append((n, b.density))
            if b.latency.mean < a.latency.mean:
                bad_lat.append((n, b.density))
    for d in dens:
        col = [ok_cells[(n, d)] for n in nodes if (n, d) in ok_cells]
        for a, b in zip(col, col[1:]):
            if b.latency.mean < a.latency.mean:
                bad_lat.append((b.node_count, d))
    out.append(Check("per-node throughput nonincreasing in density", not bad_thr, str(bad_thr) if bad_thr else ""))
    out.append(Check("latency nondecreasing in density and node count", not bad_lat, str(bad_lat) if bad_lat else ""))
    return out


def check_pcp(res: PcpResult, cfg: ExperimentConfig) -> list[Check]:
    out = [Check("no lost notifications", not res.lost, f"{len(res.lost)} lost" if res.lost else "")]
    nodes = sorted(cfg.node_counts)
    step = 2 * PipelineConfig().stride / cfg.fps
    if {"object", "behavior"} <= set(cfg.anomaly_kind):
        gaps = []
        for n in nodes:
            o, b = res.stats.get(("object", n)), res.stats.get(("behavior", n))
            if o is None or b is None or b.mean - o.mean < step:
                gaps.append(n)
        out.append(Check(f"behavior exceeds object by >= {step:.2f} s", not gaps, str(gaps) if gaps else ""))
    for kind in cfg.anomaly_kind:
        means = [res.stats[(kind, n)].mean for n in nodes if (kind, n) in res.stats]
        ok = len(means) == len(nodes) and all(b > a for a, b in zip(means, means[1:]))
        out.append(Check(f"{kind} mean increases with node count", ok, ", ".join(f"{m:.3f}" for m in means)))
    errs = res.decomposition_errors()
    worst = max(errs) if errs else 0.0
    out.append(Check(f"per-hop sum within {cfg.tolerance:.0%}", bool(errs) and worst <= cfg.tolerance,
                     f"worst {worst:.2e} over {len(errs)} samples"))
    return out


def check_endurance(res: EnduranceResult, cfg: ExperimentConfig) -> list[Check]:
    out = []
    horizon = cfg.reset_hours * 3600.0
    bad = []
    for n, events in res.resets.items():
        for e in events:
            rows_ok = e["reason"] == "rows" and e["rows"] == cfg.reset_rows
            time_ok = e["reason"] == "uptime" and abs(e["uptime"] - horizon) < 1e-6 and e["rows"] < cfg.reset_rows
            if not (rows_ok or time_ok):
                bad.append((n, e["time"]))
    out.append(Check("resets at exactly the row cap or the uptime horizon", not bad, str(bad) if bad else ""))
    regress = [n for n, c in res.id_counter.items() if any(b < a for a, b in zip(c, c[1:]))]
    out.append(Check("global-id counter never regresses", not regress, str(regress) if regress else ""))
    expected = {n: n * (int(cfg.duration * cfg.fps + 1e-9) // cfg.batch_size) for n in cfg.node_counts}
    lost = [n for n in cfg.node_counts if res.batches.get(n) != expected[n]]
    out.append(Check("every batch accounted for across resets", not lost, str(lost) if lost else ""))
    return out
