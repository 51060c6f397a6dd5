"""Command-line entry point: ``svs <command> ...``."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path

from .ainode.pipeline import CostModel, PipelineConfig
from .bench import report
from .bench.checks import check_endurance, check_load_stress, check_pcp
from .bench.experiments import ExperimentConfig, run_endurance, run_load_stress, run_pcp
from .cloud.profile import LatencyProfile
from .errors import SVSError
from .scene import ScenarioConfig, build_scenario
from .server.node import ServerConfig

log = logging.getLogger("svs")

BENCH_KINDS = {"load-stress": "load_stress", "endurance": "endurance", "pcp": "pcp"}


def _serve_forever(start) -> int:
    async def main():
        server = await start()
        async with server:
            await server.serve_forever()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    return 0


def cmd_cloud(args) -> int:
    from .net.cloud import CloudService

    profile = LatencyProfile.load(args.latency_profile) if args.latency_profile else LatencyProfile()
    svc = CloudService(profile, args.nodes, args.max_endpoints)
    log.info("cloud listening on %s", args.listen)
    return _serve_forever(lambda: svc.serve(args.listen))


def cmd_serve(args) -> int:
    from .net.server import ServerService

    cfg = ServerConfig(reset_rows=args.reset_rows, reset_hours=args.reset_hours, theta=args.theta,
                       horizon=args.horizon, tau=args.tau, audit_path=args.audit)
    svc = ServerService(cfg, cloud=args.cloud, stats_period=args.stats_period)
    log.info("server listening on %s", args.listen)
    return _serve_forever(lambda: svc.serve(args.listen))


def cmd_ai_node(args) -> int:
    from .net.node import run_ai_node

    sc = build_scenario(ScenarioConfig.load(args.scenario))
    pcfg = PipelineConfig(batch_size=args.batch, window=args.window, stride=args.stride,
                          anomaly_classes=dict(sc.config.anomaly_classes))
    speed = args.speed if args.speed is not None else sc.config.time_scale
    rep = asyncio.run(run_ai_node(sc, args.camera, args.server, args.cloud, pcfg, speed=speed,
                                  cost=None if args.no_cost else CostModel(), node_count=args.nodes))
    print(json.dumps({"batches": rep.batches, "records": rep.records, "alerts": rep.alerts,
                      "dead_letters": len(rep.dead_letters), "spilled": rep.spilled,
                      "replayed": rep.replayed}, sort_keys=True))
    return 0


def cmd_notify(args) -> int:
    from .net.notify import run_subscriber

    try:
        rows = asyncio.run(run_subscriber(args.connect, args.pattern, args.log, args.endpoint,
                                          args.count, args.timeout))
    except KeyboardInterrupt:
        return 0
    log.info("received %d notifications", len(rows))
    return 0


def cmd_bench(args) -> int:
    kind = BENCH_KINDS[args.experiment]
    if args.config:
        data = json.loads(Path(args.config).read_text())
        data.setdefault("kind", kind)
        if data["kind"] != kind:
            raise SVSError(f"config kind {data['kind']!r} does not match {kind!r}")
        cfg = ExperimentConfig.from_dict(data)
    else:
        cfg = ExperimentConfig(kind=kind, **_bench_defaults(kind))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "load_stress":
        res = run_load_stress(cfg)
        report.write_metrics(out / "metrics.csv", res.samples)
        report.write_long(out / "metrics_long.csv", res.samples)
        cells = {k: (c.latency, c.throughput) for k, c in res.cells.items() if not c.failed}
        text = report.cell_summary_table(cells)
        checks = check_load_stress(res)
    elif kind == "endurance":
        res = run_endurance(cfg)
        samples = [s for n in sorted(res.samples) for s in res.samples[n]]
        report.write_metrics(out / "metrics.csv", samples)
        report.write_long(out / "metrics_long.csv", samples)
        with open(out / "resets.ndjson", "w") as fh:
            for n in sorted(res.resets):
                for e in res.resets[n]:
                    fh.write(json.dumps({"node_count": n, **e}, sort_keys=True) + "\n")
        lines = [f"nodes {n}: {res.batches[n]} batches, {res.rows_ingested[n]} rows, "
                 f"{len(res.resets[n])} resets" for n in sorted(res.samples)]
        text = "\n".join(lines)
        checks = check_endurance(res, cfg)
    else:
        res = run_pcp(cfg)
        report.write_pcp(out / "pcp.csv", res.samples)
        text = report.pcp_tables(res.stats)
        checks = check_pcp(res, cfg)
    lines = [f"[{'PASS' if c.ok else 'FAIL'}] {c.name}" + (f" ({c.detail})" if c.detail else "") for c in checks]
    summary = report.HEADER + text + "\n\n" + "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    return 0 if all(c.ok for c in checks) else 1


def _bench_defaults(kind: str) -> dict:
    if kind == "pcp":
        return {"node_counts": (4, 8, 12, 16)}
    if kind == "endurance":
        return {"node_counts": (1, 4, 8), "duration": 21 * 3600.0, "feature_dim": 64}
    return {}


def cmd_report(args) -> int:
    print(report.summarize_file(args.csv, args.warmup, args.cooldown))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svs", description="Multi-tier video surveillance simulator and benchmarks.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cloud", help="run the cloud tier (broker and tables)")
    c.add_argument("--listen", default="127.0.0.1:7300")
    c.add_argument("--latency-profile")
    c.add_argument("--nodes", type=int, default=4, help="node count selecting the fanout tier")
    c.add_argument("--max-endpoints", type=int, default=50)
    c.set_defaults(func=cmd_cloud)

    s = sub.add_parser("serve", help="run the server tier")
    s.add_argument("--listen", default="127.0.0.1:7200")
    s.add_argument("--cloud")
    s.add_argument("--reset-rows", type=int, default=50_000)
    s.add_argument("--reset-hours", type=float, default=24.0)
    s.add_argument("--theta", type=float, default=0.7)
    s.add_argument("--horizon", type=float, default=600.0)
    s.add_argument("--tau", type=float, default=20.0)
    s.add_argument("--audit", help="append reset and notification events as NDJSON")
    s.add_argument("--stats-period", type=float, default=60.0)
    s.set_defaults(func=cmd_serve)

    a = sub.add_parser("ai-node", help="stream one scenario camera through the pipeline")
    a.add_argument("--camera", type=int, required=True)
    a.add_argument("--scenario", required=True)
    a.add_argument("--server", required=True)
    a.add_argument("--cloud")
    a.add_argument("--batch", type=int, default=30)
    a.add_argument("--window", type=int, default=30)
    a.add_argument("--stride", type=int, default=20)
    a.add_argument("--speed", type=float, help="playback speed-up (default: scenario time_scale)")
    a.add_argument("--nodes", type=int, default=1, help="nodes sharing the host, for the cost model")
    a.add_argument("--no-cost", action="store_true", help="skip synthetic stage delays")
    a.set_defaults(func=cmd_ai_node)

    n = sub.add_parser("notify", help="subscribe and log notifications")
    n.add_argument("--connect", required=True)
    n.add_argument("--pattern", default="anomaly/*")
    n.add_argument("--log")
    n.add_argument("--endpoint")
    n.add_argument("--count", type=int)
    n.add_argument("--timeout", type=float)
    n.set_defaults(func=cmd_notify)

    b = sub.add_parser("bench", help="run an experiment")
    b.add_argument("experiment", choices=sorted(BENCH_KINDS))
    b.add_argument("--config")
    b.add_argument("--out", default="bench-out")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="summarize a CSV written by bench")
    rs = r.add_subparsers(dest="report_command", required=True)
    summ = rs.add_parser("summary")
    summ.add_argument("csv")
    summ.add_argument("--warmup", type=int, default=0)
    summ.add_argument("--cooldown", type=int, default=0)
    summ.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SVSError, OSError, ValueError) as exc:
        print(f"svs: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
