"""Session wiring: one frame in, at most one trigger out, key events delivered.

The session is the single engine context. All mutation (profile swaps,
transcripts, recording toggles) is queued and applied at frame boundaries,
so subscribers never observe a half-applied configuration. Offline replay
drives `process_frame` directly; live mode runs `run()` in a thread with
idle ticks so the control plane stays responsive during tracking loss.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import IO, Iterable

from .actions import SOURCE_FACE, SOURCE_SPEECH, SWITCH_MODE, ActionEngine, KeyEvent
from .frames import AUFrame, format_header_line, format_record_line
from .profiles import Profile
from .rules import RuleEngine
from .sinks import CollectingSink, DeliveryError, EventLogSink, EventScheduler, KeySink
from .speech import TranscriptEvent, admit, match_keywords, normalize
from .streams import FrameStream
from .telemetry import Telemetry

log = logging.getLogger(__name__)

DEFAULT_UI_FPS = 15.0

CHANNEL_FRAMES = "frames"
CHANNEL_TRIGGERS = "triggers"
CHANNEL_KEYEVENTS = "keyevents"
CHANNELS = (CHANNEL_FRAMES, CHANNEL_TRIGGERS, CHANNEL_KEYEVENTS)

_FRAME_QUEUE_SIZE = 8
_EVENT_QUEUE_SIZE = 512
_BACKPRESSURE_TIMEOUT_S = 2.0


class Subscription:
    def __init__(self, channel: str, maxsize: int):
        self.channel = channel
        self.queue: queue.Queue = queue.Queue(maxsize=maxsize)
        self.dropped = 0
        self.closed = False

    def get(self, timeout: float | None = None):
        return self.queue.get(timeout=timeout)


class Broadcaster:
    """Fan-out of frame/trigger/keyevent payloads to subscriber queues.

    The frames channel drops oldest entries when a subscriber lags (counted);
    trigger and keyevent channels apply backpressure, and a subscriber that
    stays wedged past the timeout is disconnected rather than wedging the
    engine.
    """

    def __init__(self, telemetry: Telemetry | None = None):
        self._lock = threading.Lock()
        self._subs: list[Subscription] = []
        self.telemetry = telemetry or Telemetry()

    def subscribe(self, channel: str) -> Subscription:
        if channel not in CHANNELS:
            raise ValueError(f"unknown channel {channel!r}")
        maxsize = _FRAME_QUEUE_SIZE if channel == CHANNEL_FRAMES else _EVENT_QUEUE_SIZE
        sub = Subscription(channel, maxsize)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        sub.closed = True
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def publish(self, channel: str, payload: dict) -> None:
        with self._lock:
            subs = [s for s in self._subs if s.channel == channel]
        for sub in subs:
            if channel == CHANNEL_FRAMES:
                try:
                    sub.queue.put_nowait(payload)
                except queue.Full:
                    try:
                        sub.queue.get_nowait()
                    except queue.Empty:
                        pass
                    sub.dropped += 1
                    self.telemetry.count("frames-channel-dropped")
                    try:
                        sub.queue.put_nowait(payload)
                    except queue.Full:
                        pass
            else:
                try:
                    sub.queue.put(payload, timeout=_BACKPRESSURE_TIMEOUT_S)
                except queue.Full:
                    self.telemetry.error(
                        "subscriber-stalled", f"{channel} subscriber evicted after backpressure"
                    )
                    self.unsubscribe(sub)


class Ack:
    """Reply handle for control messages applied at a frame boundary."""

    def __init__(self):
        self._event = threading.Event()
        self.ok = False
        self.frame_index: int | None = None
        self.version: int | None = None
        self.error: str | None = None

    def resolve(self, ok: bool, frame_index: int | None = None, version: int | None = None, error: str | None = None):
        self.ok = ok
        self.frame_index = frame_index
        self.version = version
        self.error = error
        self._event.set()

    def wait(self, timeout: float | None = None) -> bool:
        return self._event.wait(timeout)


@dataclass
class _Recording:
    base_path: str
    frames_fh: IO[str]
    events_sink: EventLogSink


class Session:
    """Owns the rule engine, action engine, scheduler, and sink."""

    def __init__(
        self,
        profile: Profile,
        sink: KeySink | None = None,
        telemetry: Telemetry | None = None,
        broadcaster: Broadcaster | None = None,
        ui_fps: float = DEFAULT_UI_FPS,
    ):
        self.telemetry = telemetry or Telemetry()
        self.broadcaster = broadcaster or Broadcaster(self.telemetry)
        self.sink = sink or CollectingSink()
        self.ui_fps = ui_fps
        self.version = 1
        self.triggers: deque[tuple[int, str]] = deque(maxlen=100_000)
        self._control: queue.Queue = queue.Queue()
        self._transcripts: queue.Queue = queue.Queue()
        self._recording: _Recording | None = None
        self._status_lock = threading.Lock()
        self._status: dict = {}
        self._arrivals: deque[float] = deque(maxlen=30)
        self._last_frame_index = -1
        self._last_frame_ts = 0
        self._wall_at_last_frame = time.monotonic()
        self._last_frame_publish = 0.0
        self._started = False
        self._last_rule_telemetry: dict[str, tuple[bool, int]] = {}
        self._install_profile(profile)
        self._publish_status()

    # -- profile / engine state ------------------------------------------------

    def _install_profile(self, profile: Profile) -> None:
        self.profile = profile
        mode = profile.initial_mode
        self.engine = RuleEngine(profile.rules, active_rule_ids=profile.modes[mode].bindings)
        self.actions = ActionEngine(
            initial_mode=mode,
            macros={m.macro_id: m for m in profile.macros},
            tap_hold_ms=profile.engine_params.tap_hold_ms,
            note=self.telemetry.error,
        )
        self.scheduler = EventScheduler()

    def _sync_active_rules(self) -> None:
        mode = self.profile.modes[self.actions.active_mode]
        self.engine.set_active(mode.bindings)

    # -- control plane ----------------------------------------------------------

    def submit_profile(self, profile: Profile) -> Ack:
        """Queue a hot swap; applied at the next frame boundary."""
        ack = Ack()
        self._control.put(("swap", profile, ack))
        return ack

    def set_recording(self, path: str | None, on: bool) -> Ack:
        ack = Ack()
        self._control.put(("record", (path, on), ack))
        return ack

    def inject_transcript(self, text: str, spoken_end_ms: int | None = None) -> TranscriptEvent:
        now = self.now_ms()
        event = TranscriptEvent(
            text=text,
            spoken_end_ms=now if spoken_end_ms is None else spoken_end_ms,
            received_ms=now,
        )
        self.submit_transcript(event)
        return event

    def submit_transcript(self, event: TranscriptEvent) -> None:
        """Queue a transcript (e.g. from the transcript socket); matched at
        the next frame boundary."""
        self._transcripts.put(event)

    def now_ms(self) -> int:
        """Engine clock: last frame timestamp plus wall time since it arrived."""
        if not self._started:
            return 0
        return self._last_frame_ts + int((time.monotonic() - self._wall_at_last_frame) * 1000)

    def _apply_control(self, now_ms: int, effective_frame_index: int) -> None:
        while True:
            try:
                kind, payload, ack = self._control.get_nowait()
            except queue.Empty:
                return
            if kind == "swap":
                self._apply_swap(payload, now_ms, effective_frame_index, ack)
            elif kind == "record":
                self._apply_record(payload, ack)

    def _apply_swap(self, profile: Profile, now_ms: int, frame_index: int, ack: Ack) -> None:
        release = self.actions.safety_release(now_ms)
        self.scheduler.schedule(release)
        self._deliver_due(now_ms)
        self._flush_scheduler()
        self._install_profile(profile)
        self._last_rule_telemetry = {}
        self.version += 1
        ack.resolve(True, frame_index=frame_index, version=self.version)
        log.info("profile %r applied at frame %d", profile.name, frame_index)

    def _apply_record(self, payload: tuple[str | None, bool], ack: Ack) -> None:
        path, on = payload
        if self._recording is not None:
            self._recording.frames_fh.close()
            self._recording.events_sink.close()
            self._recording = None
        if not on:
            ack.resolve(True, version=self.version)
            return
        try:
            frames_fh = open(f"{path}.frames.csv", "w", encoding="utf-8")
            frames_fh.write(format_header_line() + "\n")
            events_sink = EventLogSink(f"{path}.events.log")
        except OSError as exc:
            self.telemetry.error("record-open", str(exc))
            ack.resolve(False, error=str(exc))
            return
        self._recording = _Recording(str(path), frames_fh, events_sink)
        ack.resolve(True, version=self.version)

    # -- frame processing --------------------------------------------------------

    def process_frame(self, frame: AUFrame) -> list[str]:
        """One engine step at a frame boundary; returns this frame's triggers."""
        now = frame.timestamp_ms
        self._started = True
        self._apply_control(now, frame.frame_index)
        if self._recording is not None:
            self._recording.frames_fh.write(format_record_line(frame) + "\n")
        self._drain_transcripts(now)

        step = self.engine.step(frame)
        events: list[KeyEvent] = []
        for rule_id in step.triggers:
            action = self.profile.modes[self.actions.active_mode].bindings[rule_id]
            events.extend(self.actions.execute(action, now, SOURCE_FACE))
            if action.kind == SWITCH_MODE:
                self._sync_active_rules()
            self.triggers.append((frame.frame_index, rule_id))
            self.broadcaster.publish(
                CHANNEL_TRIGGERS,
                {"frame_index": frame.frame_index, "rule_id": rule_id, "timestamp_ms": now},
            )
        if events:
            self.scheduler.schedule(events)
        self._deliver_due(now)

        self._last_frame_index = frame.frame_index
        self._last_frame_ts = now
        self._wall_at_last_frame = time.monotonic()
        self._arrivals.append(self._wall_at_last_frame)
        self._maybe_publish_frame(frame)
        self._publish_status(step.telemetry)
        return step.triggers

    def tick(self) -> None:
        """Idle boundary: keeps control and speech responsive with no frames."""
        now = self.now_ms()
        self._apply_control(now, self._last_frame_index + 1)
        self._drain_transcripts(now)
        self._deliver_due(now)
        self._publish_status()

    def _drain_transcripts(self, now_ms: int) -> None:
        staleness = self.profile.engine_params.staleness_ms
        while True:
            try:
                event = self._transcripts.get_nowait()
            except queue.Empty:
                return
            if not admit(event, now_ms, staleness):
                self.telemetry.error(
                    "transcript-stale",
                    f"dropped {event.text!r} ({now_ms - event.spoken_end_ms} ms old)",
                )
                continue
            mode = self.profile.modes[self.actions.active_mode]
            actions = match_keywords(normalize(event.text), list(mode.keywords))
            events: list[KeyEvent] = []
            for action in actions:
                events.extend(self.actions.execute(action, now_ms, SOURCE_SPEECH))
                if action.kind == SWITCH_MODE:
                    self._sync_active_rules()
            if events:
                self.scheduler.schedule(events)

    def _deliver_due(self, now_ms: int) -> None:
        for event in self.scheduler.advance_to(now_ms):
            self._deliver(event)

    def _flush_scheduler(self) -> None:
        for event in self.scheduler.flush():
            self._deliver(event)

    def _deliver(self, event: KeyEvent) -> None:
        try:
            self.sink.deliver(event)
        except DeliveryError as exc:
            self.telemetry.error("sink-delivery", str(exc))
        if self._recording is not None:
            self._recording.events_sink.deliver(event)
        self.broadcaster.publish(
            CHANNEL_KEYEVENTS,
            {
                "timestamp_ms": event.timestamp_ms,
                "key": event.key,
                "edge": event.edge,
                "source": event.source,
            },
        )

    def _maybe_publish_frame(self, frame: AUFrame) -> None:
        now = time.monotonic()
        if self.ui_fps > 0 and now - self._last_frame_publish < 1.0 / self.ui_fps:
            return
        self._last_frame_publish = now
        self.broadcaster.publish(
            CHANNEL_FRAMES,
            {
                "frame_index": frame.frame_index,
                "timestamp_ms": frame.timestamp_ms,
                "confidence": frame.confidence,
                "intensity": {str(au): round(v, 3) for au, v in frame.intensity.items()},
                "presence": {str(au): p for au, p in frame.presence.items()},
            },
        )

    # -- status -------------------------------------------------------------------

    def _fps_estimate(self) -> float | None:
        if len(self._arrivals) < 2:
            return None
        span = self._arrivals[-1] - self._arrivals[0]
        if span <= 0:
            return None
        return (len(self._arrivals) - 1) / span

    def _publish_status(self, rule_telemetry: dict[str, tuple[bool, int]] | None = None) -> None:
        if rule_telemetry is not None:
            self._last_rule_telemetry = rule_telemetry
        else:
            rule_telemetry = self._last_rule_telemetry
        rules = {}
        for rule in self.profile.rules:
            matched, count = rule_telemetry.get(rule.rule_id, (False, 0))
            rules[rule.rule_id] = {
                "matched": matched,
                "consecutive_count": count,
                "total_fires": self.engine.total_fires.get(rule.rule_id, 0),
            }
        status = {
            "active_profile": self.profile.name,
            "active_mode": self.actions.active_mode,
            "fps": self._fps_estimate(),
            "frame_index": self._last_frame_index,
            "rules": rules,
            "held_keys": sorted(self.actions.held_keys),
            "last_errors": self.telemetry.last_errors(),
            "version": self.version,
            "recording": self._recording.base_path if self._recording else None,
        }
        with self._status_lock:
            self._status = status

    def status_snapshot(self) -> dict:
        with self._status_lock:
            return dict(self._status)

    # -- lifecycle ------------------------------------------------------------------

    def shutdown(self) -> None:
        """Release held keys and flush pending events; invoked on stream end."""
        now = self.now_ms()
        release = self.actions.safety_release(now)
        self.scheduler.schedule(release)
        self._flush_scheduler()
        if self._recording is not None:
            self._recording.frames_fh.close()
            self._recording.events_sink.close()
            self._recording = None
        self.sink.close()
        self._publish_status()

    def run(self, stream: FrameStream, stop: threading.Event | None = None) -> None:
        stop = stop or threading.Event()
        try:
            while not stop.is_set():
                try:
                    frame = stream.next_frame(timeout=0.05)
                except TimeoutError:
                    self.tick()
                    continue
                if frame is None:
                    break
                self.process_frame(frame)
        finally:
            self.shutdown()


@dataclass
class OfflineRun:
    triggers: list[tuple[int, str]]
    events: list[KeyEvent]
    session: Session


def run_offline(
    frames: Iterable[AUFrame],
    profile: Profile,
    sink: CollectingSink | None = None,
    swap_at: tuple[int, Profile] | None = None,
) -> OfflineRun:
    """Deterministic replay: no wall-clock pacing, no threads.

    ``swap_at=(frame_index, profile)`` queues a hot swap that takes effect at
    the boundary of the first frame with index >= frame_index.
    """
    sink = sink or CollectingSink()
    session = Session(profile, sink=sink)
    swap_pending = swap_at
    for frame in frames:
        if swap_pending is not None and frame.frame_index >= swap_pending[0]:
            session.submit_profile(swap_pending[1])
            swap_pending = None
        session.process_frame(frame)
    session.shutdown()
    return OfflineRun(triggers=list(session.triggers), events=sink.snapshot(), session=session)
