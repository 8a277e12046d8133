"""Command-line entry points: run, validate, replay, sim."""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import threading
from pathlib import Path

from . import simcal
from .profiles import Profile, builtin_profiles, load_profile_file, parse_profile, serialize_profile
from .runtime import Session, run_offline
from .service import (
    DEFAULT_LISTEN,
    LISTEN_ENV_VAR,
    ControlService,
    TranscriptSocketListener,
    parse_listen_addr,
)
from .sinks import CollectingSink, DeliveryError, EventLogSink, PlatformKeySink
from .streams import (
    LIVE_SOCKET,
    REPLAY_FILE,
    STANDARD_INPUT,
    SourceOpenError,
    StreamSource,
    open_stream,
    read_frames_csv,
    write_frames_csv,
)
from .telemetry import Telemetry

log = logging.getLogger(__name__)


def _load_profile(spec: str) -> Profile:
    """A profile argument is a builtin name or a document path."""
    builtins = builtin_profiles()
    if spec in builtins:
        return builtins[spec]
    result = load_profile_file(spec)
    if not result.ok:
        for err in result.errors:
            print(f"error: {err}", file=sys.stderr)
        raise SystemExit(2)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return result.profile


def _parse_source(spec: str, fps: float | None) -> StreamSource:
    if spec == "stdin":
        return StreamSource(STANDARD_INPUT)
    kind, _, locator = spec.partition(":")
    if kind == "replay" and locator:
        return StreamSource(REPLAY_FILE, locator, fps_override=fps)
    if kind == "socket" and locator:
        return StreamSource(LIVE_SOCKET, locator)
    raise SystemExit(f"error: --source must be replay:PATH, socket:ADDR, or stdin (got {spec!r})")


def _make_sink(spec: str, telemetry: Telemetry):
    if spec == "collect":
        return CollectingSink()
    if spec == "platform":
        try:
            return PlatformKeySink()
        except DeliveryError as exc:
            telemetry.error("sink-unavailable", str(exc))
            print(f"warning: {exc}; falling back to collect sink", file=sys.stderr)
            return CollectingSink()
    kind, _, path = spec.partition(":")
    if kind == "file" and path:
        return EventLogSink(path)
    raise SystemExit(f"error: --sink must be collect, file:PATH, or platform (got {spec!r})")


def _default_ui_dir() -> str | None:
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return str(candidate) if candidate.is_dir() else None


def cmd_run(args) -> int:
    profile = _load_profile(args.profile)
    telemetry = Telemetry()
    sink = _make_sink(args.sink, telemetry)
    source = _parse_source(args.source, args.fps)
    session = Session(profile, sink=sink, telemetry=telemetry)

    service = None
    transcripts = None
    listen = args.listen or os.environ.get(LISTEN_ENV_VAR) or DEFAULT_LISTEN
    if listen != "off":
        host, port = parse_listen_addr(listen)
        ui_dir = args.ui_dir or _default_ui_dir()
        service = ControlService(session, host=host, port=port, ui_dir=ui_dir)
        host, port = service.start()
        print(f"control service on http://{host}:{port}/", file=sys.stderr)
    if args.transcript_socket:
        transcripts = TranscriptSocketListener(session, args.transcript_socket)
        print(f"transcript socket on {transcripts.address}", file=sys.stderr)

    try:
        stream = open_stream(source, telemetry=telemetry, realtime=not args.no_pace)
    except SourceOpenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if transcripts:
            transcripts.close()
        if service:
            service.stop()
        return 2

    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        session.run(stream, stop)
    finally:
        stream.close()
        if transcripts:
            transcripts.close()
        if service:
            service.stop()
    if isinstance(sink, CollectingSink):
        for event in sink.snapshot():
            print(event.as_line())
    return 0


def cmd_validate(args) -> int:
    try:
        text = Path(args.profile).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = parse_profile(text)
    for err in result.errors:
        print(f"error: {err}")
    for warning in result.warnings:
        print(f"warning: {warning}")
    if result.ok:
        print(f"ok: profile {result.profile.name!r} is valid")
        return 0
    return 1


def cmd_replay(args) -> int:
    profile = _load_profile(args.profile)
    frames = read_frames_csv(args.framelog)
    run = run_offline(frames, profile)
    with open(args.out, "w", encoding="utf-8") as fh:
        for event in run.events:
            fh.write(event.as_line() + "\n")
    if args.triggers:
        with open(args.triggers, "w", encoding="utf-8") as fh:
            for frame_index, rule_id in run.triggers:
                fh.write(f"{frame_index},{rule_id}\n")
    print(f"{len(frames)} frames -> {len(run.triggers)} triggers, {len(run.events)} key events")
    return 0


def _load_script(path: str) -> simcal.EpisodeScript:
    return simcal.parse_script(Path(path).read_text(encoding="utf-8"))


def _script_rules(args) -> dict:
    profile = _load_profile(args.profile) if args.profile else builtin_profiles()["table1-default"]
    return {r.rule_id: r for r in profile.rules}


def cmd_sim_generate(args) -> int:
    script = _load_script(args.script)
    frames = simcal.generate_stream(script, rules=_script_rules(args), seed=args.seed)
    count = write_frames_csv(args.out, frames)
    print(f"wrote {count} frames to {args.out}")
    return 0


def cmd_sim_run(args) -> int:
    script = _load_script(args.script)
    profile = _load_profile(args.profile) if args.profile else builtin_profiles()["table1-default"]
    frames = simcal.generate_stream(script, rules={r.rule_id: r for r in profile.rules}, seed=args.seed)
    run = run_offline(frames, profile)
    metrics = simcal.measure(run.triggers, script)
    latency = metrics.mean_latency
    print("episode,latency_frames")
    for i, lat in enumerate(metrics.episode_latencies):
        print(f"{i},{'' if lat is None else lat}")
    print(f"false_positives,{metrics.false_positive_count}")
    print(f"misses,{metrics.miss_count}")
    print(f"mean_latency,{'' if latency is None else f'{latency:.3f}'}")
    if args.triggers:
        with open(args.triggers, "w", encoding="utf-8") as fh:
            for frame_index, rule_id in run.triggers:
                fh.write(f"{frame_index},{rule_id}\n")
    return 0


def _parse_grid(spec: str) -> list[float]:
    if ":" in spec:
        start, stop, step = (float(x) for x in spec.split(":"))
        values = []
        v = start
        while v <= stop + 1e-9:
            values.append(round(v, 6))
            v += step
        return values
    return [float(x) for x in spec.split(",")]


def cmd_sim_sweep(args) -> int:
    script = _load_script(args.script)
    if args.frames:
        frames = read_frames_csv(args.frames)
    else:
        frames = simcal.generate_stream(script, rules=_script_rules(args), seed=args.seed)
    au_ids = [int(a) for a in args.au.split(",")]
    thresholds = _parse_grid(args.thresholds)
    ks = [int(k) for k in args.k.split(",")]
    rows = simcal.sweep(frames, script, au_ids, thresholds, ks)
    csv_text = simcal.sweep_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(csv_text, end="")
    return 0


def cmd_profiles_export(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, profile in builtin_profiles().items():
        path = out_dir / f"{name}.json"
        path.write_text(serialize_profile(profile), encoding="utf-8")
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facekey", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the engine on a frame source")
    p_run.add_argument("--profile", required=True, help="builtin name or profile file")
    p_run.add_argument("--source", required=True, help="replay:PATH, socket:ADDR, or stdin")
    p_run.add_argument("--sink", default="collect", help="collect, file:PATH, or platform")
    p_run.add_argument("--listen", default=None, help="control API host:port, or 'off'")
    p_run.add_argument("--ui-dir", default=None, help="serve this directory at /")
    p_run.add_argument(
        "--transcript-socket", default=None, help="accept transcripts on this host:port or path"
    )
    p_run.add_argument("--fps", type=float, default=None, help="replay pacing override")
    p_run.add_argument("--no-pace", action="store_true", help="replay at full speed")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="validate a profile document")
    p_val.add_argument("profile")
    p_val.set_defaults(func=cmd_validate)

    p_rep = sub.add_parser("replay", help="offline replay of a frame log")
    p_rep.add_argument("framelog")
    p_rep.add_argument("--profile", required=True)
    p_rep.add_argument("--out", required=True, help="key-event log output path")
    p_rep.add_argument("--triggers", default=None, help="also write frame_index,rule_id lines")
    p_rep.set_defaults(func=cmd_replay)

    p_sim = sub.add_parser("sim", help="synthetic streams, metrics, sweeps")
    sim_sub = p_sim.add_subparsers(dest="sim_command", required=True)

    p_gen = sim_sub.add_parser("generate", help="script -> frames csv")
    p_gen.add_argument("script")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--profile", default=None, help="rules for episode templates")
    p_gen.set_defaults(func=cmd_sim_generate)

    p_srun = sim_sub.add_parser("run", help="generate, run the engine, report metrics")
    p_srun.add_argument("script")
    p_srun.add_argument("--profile", default=None)
    p_srun.add_argument("--seed", type=int, default=0)
    p_srun.add_argument("--triggers", default=None)
    p_srun.set_defaults(func=cmd_sim_run)

    p_swp = sim_sub.add_parser("sweep", help="exhaustive threshold / frame-count grid")
    p_swp.add_argument("script")
    p_swp.add_argument("--frames", default=None, help="recorded frames csv (else generated)")
    p_swp.add_argument("--au", required=True, help="comma-separated AU ids")
    p_swp.add_argument("--thresholds", required=True, help="list 1.0,1.5 or range 1.0:4.0:0.5")
    p_swp.add_argument("--k", required=True, help="comma-separated frame thresholds")
    p_swp.add_argument("--seed", type=int, default=0)
    p_swp.add_argument("--out", default=None)
    p_swp.add_argument("--profile", default=None)
    p_swp.set_defaults(func=cmd_sim_sweep)

    p_exp = sub.add_parser("export-profiles", help="write builtin profiles as files")
    p_exp.add_argument("--out-dir", default="profiles")
    p_exp.set_defaults(func=cmd_profiles_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
