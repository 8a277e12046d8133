"""Key sinks and timestamp-ordered event delivery.

Sinks are the delivery boundary for synthesized key events: an in-memory
collector for tests, a newline-delimited log file, and an optional OS
key-injection adapter (absent in CI). The scheduler holds scheduled events
in a heap and releases them in timestamp order as time advances, so macro
tails and tap releases interleave correctly with later actions.
"""

from __future__ import annotations

import heapq
import threading
from pathlib import Path
from typing import IO, Iterable

from .actions import DOWN, KeyEvent


class DeliveryError(RuntimeError):
    """A sink could not deliver events; surfaced to telemetry, not fatal."""


class KeySink:
    def deliver(self, event: KeyEvent) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


class CollectingSink(KeySink):
    """Keeps every delivered event in order, for assertions and telemetry."""

    def __init__(self):
        self._lock = threading.Lock()
        self.events: list[KeyEvent] = []

    def deliver(self, event: KeyEvent) -> None:
        with self._lock:
            self.events.append(event)

    def snapshot(self) -> list[KeyEvent]:
        with self._lock:
            return list(self.events)


class EventLogSink(KeySink):
    """Writes ``timestamp_ms,key,edge,source`` lines; replayable offline."""

    def __init__(self, path: str | Path):
        self._fh: IO[str] = open(path, "w", encoding="utf-8")

    def deliver(self, event: KeyEvent) -> None:
        self._fh.write(event.as_line() + "\n")

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


class PlatformKeySink(KeySink):
    """Adapter for a real synthetic-keyboard backend (pynput), if installed."""

    def __init__(self):
        try:
            from pynput.keyboard import Controller  # type: ignore
        except ImportError as exc:
            raise DeliveryError("platform key injection unavailable (pynput not installed)") from exc
        self._controller = Controller()

    def deliver(self, event: KeyEvent) -> None:
        try:
            if event.edge == DOWN:
                self._controller.press(event.key)
            else:
                self._controller.release(event.key)
        except Exception as exc:  # backend-specific failures
            raise DeliveryError(str(exc)) from exc


def parse_event_log(path: str | Path) -> list[KeyEvent]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(KeyEvent.from_line(line))
    return events


def sink_deliver(events: Iterable[KeyEvent], sink: KeySink) -> int:
    """Deliver a batch in timestamp order (stable for equal stamps)."""
    count = 0
    for event in sorted(events, key=lambda e: e.timestamp_ms):
        sink.deliver(event)
        count += 1
    return count


class EventScheduler:
    """Min-heap of scheduled events, released in (timestamp, insertion) order."""

    def __init__(self):
        self._heap: list[tuple[int, int, KeyEvent]] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, events: Iterable[KeyEvent]) -> None:
        for event in events:
            heapq.heappush(self._heap, (event.timestamp_ms, self._seq, event))
            self._seq += 1

    def advance_to(self, now_ms: int) -> list[KeyEvent]:
        """Pop every event due at or before ``now_ms``, oldest first."""
        due: list[KeyEvent] = []
        while self._heap and self._heap[0][0] <= now_ms:
            due.append(heapq.heappop(self._heap)[2])
        return due

    def flush(self) -> list[KeyEvent]:
        due = [heapq.heappop(self._heap)[2] for _ in range(len(self._heap))]
        return due
