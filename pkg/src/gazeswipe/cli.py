"""Command-line interface: experiments, reports, event replay, live service."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .calibration import Calibrator, CalibratorConfig, STRATEGIES
from .geometry import builtin_profiles, profile_by_name
from .interaction import GazeSwipeEngine, InteractionEvent, PureCursorEngine, generate_layout
from .metrics import export_csv, parse_csv
from .report import render_figures, report_document
from .simulation import ExperimentConfig, default_config, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gazeswipe",
                                     description="Gaze-and-swipe interaction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("experiment-run", help="run a synthetic-user experiment")
    run.add_argument("--config", type=Path, help="experiment config JSON")
    run.add_argument("--seed", type=int, help="run a single seed, overriding the config")
    run.add_argument("--device", help="device profile name, overriding the config")
    run.add_argument("--technique", help="GazeSwipe or PureCursor, overriding the config")
    run.add_argument("--out", type=Path, required=True, help="output CSV path")

    rep = sub.add_parser("experiment-report", help="summarize an experiment CSV")
    rep.add_argument("--in", dest="infile", type=Path, required=True)
    rep.add_argument("--window", type=int, default=16)
    rep.add_argument("--step", type=int, default=4)
    rep.add_argument("--figures", type=Path,
                     help="directory for rendered figures (PNG)")
    rep.add_argument("--seed", type=int, help="accepted for interface uniformity")

    rpl = sub.add_parser("replay", help="re-run an interaction event log")
    rpl.add_argument("--events", type=Path, required=True, help="JSON-lines event log")
    rpl.add_argument("--strategy", required=True, choices=list(STRATEGIES))
    rpl.add_argument("--device", default="phone")
    rpl.add_argument("--technique", default="GazeSwipe")
    rpl.add_argument("--seed", type=int, default=0, help="layout seed")

    sub.add_parser("profiles", help="list builtin device profiles")

    srv = sub.add_parser("serve", help="start the live session service")
    srv.add_argument("--port", type=int, default=8787)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--seed", type=int, help="accepted for interface uniformity")
    return parser


def _cmd_experiment_run(args) -> int:
    if args.config is not None:
        cfg = ExperimentConfig.from_json(args.config.read_text())
    else:
        cfg = default_config(args.device or "phone", args.technique or "GazeSwipe")
    if args.device:
        cfg = replace(cfg, device=args.device)
    if args.technique:
        cfg = replace(cfg, technique=args.technique)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    records = run_experiment(cfg)
    export_csv(records, args.out)
    print(f"wrote {len(records)} trials to {args.out}")
    return 0


def _cmd_experiment_report(args) -> int:
    records = parse_csv(args.infile)
    print(report_document(records, window=args.window, step=args.step))
    if args.figures is not None:
        for p in render_figures(records, args.figures):
            print(f"figure: {p}", file=sys.stderr)
    return 0


def _cmd_replay(args) -> int:
    profile = profile_by_name(args.device)
    layout = generate_layout(args.seed, profile)
    if args.technique == "GazeSwipe":
        calibrator = Calibrator(CalibratorConfig(strategy=args.strategy)) \
            if args.strategy != "EC" else None
        if calibrator is None:
            raise ValueError("replay does not support EC (no explicit store in a log)")
        engine = GazeSwipeEngine(profile, layout, calibrator)
    elif args.technique == "PureCursor":
        engine = PureCursorEngine(profile, layout)
    else:
        raise ValueError(f"unknown technique {args.technique!r}")
    for line in args.events.read_text().splitlines():
        if not line.strip():
            continue
        outcome, sample = engine.handle(InteractionEvent.from_json(line))
        if outcome is not None:
            print(json.dumps({
                "released_pos_pt": list(outcome.released_pos_pt),
                "hit_element": outcome.hit_element,
                "success": outcome.success,
                "thumb_distance_cm": round(outcome.thumb_distance_cm, 6),
                "duration_s": round(outcome.duration_s, 6),
                "gesture": outcome.gesture.value,
            }, sort_keys=True))
    return 0


def _cmd_profiles(_args) -> int:
    for p in builtin_profiles():
        print(p.name)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    static = Path("frontend/dist")
    app = create_app(static_dir=str(static) if static.is_dir() else None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "experiment-run": _cmd_experiment_run,
    "experiment-report": _cmd_experiment_report,
    "replay": _cmd_replay,
    "profiles": _cmd_profiles,
    "serve": _cmd_serve,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
