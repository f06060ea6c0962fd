"""Command line entry points: run, benchmark, report, serve."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .benchmark import benchmark_allocators, format_benchmark, write_benchmark
from .config import ConfigError, ScenarioConfig, load_config
from .runner import ScenarioRunner
from .scenarios import PRESETS
from .sim import NumericalBlowup

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load(args) -> ScenarioConfig:
    if args.preset:
        cfg = PRESETS[args.preset]()
        if args.config:
            raise ConfigError("--preset and --config are mutually exclusive")
    else:
        cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.override({"seed": args.seed})
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    runner = ScenarioRunner(cfg)
    log = runner.run()
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        log.to_jsonl(out / "run.jsonl")
        log.to_csv(out / "run.csv")
        from .report import write_summary
        data = write_summary(log, out / "summary.json")
    else:
        from .report import summary
        data = summary(log)
    print(json.dumps(data, indent=2, sort_keys=True))
    return 0


def cmd_benchmark(args) -> int:
    sizes = tuple(int(s) for s in args.sizes.split(","))
    results = benchmark_allocators(sizes, repetitions=args.repetitions)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_benchmark(results, out)
    print(format_benchmark(results))
    return 0


def cmd_report(args) -> int:
    import numpy as np

    from .runner import RunLog, SCHEMA_FIELDS

    with open(args.log) as fh:
        header = json.loads(fh.readline())
        rows = [json.loads(line) for line in fh if line.strip()]
    if header.get("schema") != "cableteam-run/1":
        raise ConfigError("unrecognized log schema")
    log = RunLog(len(rows), header["n"])
    for row in rows:
        log.append({key: np.asarray(row[key]) for key in SCHEMA_FIELDS})
    log.trim()
    log.events = header.get("events", [])
    log.meta = header.get("meta", {})
    from .report import summary
    data = summary(log)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps(data, indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    cfg = _load(args)
    if args.port is not None:
        cfg = cfg.override({"service": {"port": args.port}})
    serve(cfg, out_dir=args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cableteam",
        description="Cable-suspended payload transport: simulation, control "
                    "and live interaction")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario YAML file")
        p.add_argument("--preset", choices=sorted(PRESETS),
                       help="built-in scenario preset")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--out", help="output directory (run) or file")

    p_run = sub.add_parser("run", help="run a scenario headlessly")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("benchmark", help="time the allocator stages")
    p_bench.add_argument("--sizes", default="3,6,12,24")
    p_bench.add_argument("--repetitions", type=int, default=30)
    p_bench.add_argument("--out", help="JSON output path")
    p_bench.set_defaults(func=cmd_benchmark)

    p_rep = sub.add_parser("report", help="summarize a JSONL run log")
    p_rep.add_argument("log", help="path to run.jsonl")
    p_rep.add_argument("--out", help="JSON output path")
    p_rep.set_defaults(func=cmd_report)

    p_srv = sub.add_parser("serve", help="run with the live interaction service")
    common(p_srv)
    p_srv.add_argument("--port", type=int, help="override the service port")
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBlowup as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
