"""Command line entry point.

Subcommands: ``serve`` (run the signal server), ``simulate`` (run testbed
experiments to CSV plus a run manifest), ``chart`` (export animation frames
for one device from replayed state), ``replay`` (rebuild state from logs and
summarize it). Exit codes: 0 success, 2 configuration error, 3 environment
error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .api import BindError
from .config import Config, ConfigError, load_config
from .ingest import UnknownDeviceError
from .service import MalformedLogLine, replay
from .util import format_time, parse_time

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ENV = 3
EXIT_RUNTIME = 4

log = logging.getLogger("netdist")


def _setup_logging() -> None:
    level = os.environ.get("NETDIST_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netdist")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the signal server")
    p_serve.add_argument("--config", required=True)

    p_sim = sub.add_parser("simulate", help="run testbed experiments")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--seed", type=int, default=None)

    p_chart = sub.add_parser("chart", help="export chart frames for a device")
    p_chart.add_argument("--state", required=True, help="server data directory")
    p_chart.add_argument("--device", required=True)
    p_chart.add_argument("--from", dest="t0", required=True, help="ISO-8601 UTC")
    p_chart.add_argument("--to", dest="t1", required=True, help="ISO-8601 UTC")
    p_chart.add_argument("--step", type=float, default=86400.0, help="seconds per frame")
    p_chart.add_argument("--out", default="-", help="output CSV path, - for stdout")
    p_chart.add_argument("--config", default=None)

    p_replay = sub.add_parser("replay", help="rebuild state from logs and summarize")
    p_replay.add_argument("--state", required=True)
    p_replay.add_argument("--config", default=None)

    return parser


def cmd_serve(args) -> int:
    config = load_config(args.config)
    from .api import serve
    try:
        serve(config)
    except KeyboardInterrupt:
        return EXIT_OK
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .sim.experiments import EXPERIMENTS

    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed

    names = config.experiments.run or list(EXPERIMENTS)
    for name in names:
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    outputs = []
    for name in names:
        log.info("running experiment %s", name)
        header, rows = EXPERIMENTS[name](config)
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        outputs.append(path.name)

    manifest = {
        "config_digest": hashlib.sha256(Path(args.config).read_bytes()).hexdigest(),
        "seed": config.seed,
        "code_version": __version__,
        "started": format_time(started),
        "finished": format_time(time.time()),
        "outputs": outputs,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return EXIT_OK


def _open_state(state_dir: str, config_path: str | None):
    d = Path(state_dir)
    events = d / "events.jsonl"
    reports = d / "reports.jsonl"
    if not d.is_dir() or not (events.exists() or reports.exists()):
        raise FileNotFoundError(f"no replayable state in {state_dir}")
    config = load_config(config_path) if config_path else Config()
    return replay(events, reports, config=config)


def cmd_chart(args) -> int:
    service = _open_state(args.state, args.config)
    t0 = parse_time(args.t0)
    t1 = parse_time(args.t1)
    frames = service.export_frames(args.device, t0, t1, args.step)

    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        writer = csv.writer(out)
        writer.writerow(["t", "d", "positive", "contact"])
        for frame in frames:
            for d in range(len(frame.positive)):
                writer.writerow([frame.as_of, d + 1, frame.positive[d], frame.contact[d]])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_replay(args) -> int:
    service = _open_state(args.state, args.config)
    times = [r.timestamp for r in service.pipeline.records]
    times += [r.reported_at for r in service.reports]
    as_of = max(times) + 1.0 if times else time.time()
    summary = {
        "devices": len(service.registry),
        "detections": len(service.pipeline.records),
        "case_reports": len(service.reports),
        "generation": service.generation,
        "as_of": format_time(as_of),
        "edges_now": service.graph_snapshot(as_of).edge_count(),
    }
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def main(argv=None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    handlers = {"serve": cmd_serve, "simulate": cmd_simulate,
                "chart": cmd_chart, "replay": cmd_replay}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"netdist: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BindError as exc:
        print(f"netdist: {exc}", file=sys.stderr)
        return EXIT_ENV
    except FileNotFoundError as exc:
        print(f"netdist: {exc}", file=sys.stderr)
        return EXIT_ENV
    except (MalformedLogLine, UnknownDeviceError, ValueError) as exc:
        print(f"netdist: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
