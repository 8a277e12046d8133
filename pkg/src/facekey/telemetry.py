"""Counters and recent-error ring shared across the pipeline."""

from __future__ import annotations

import threading
from collections import deque


class Telemetry:
    """Thread-safe counters plus a bounded list of recent error notes.

    Producers call :meth:`count` / :meth:`error` from any thread; readers
    take a :meth:`snapshot` at frame boundaries.
    """

    def __init__(self, max_errors: int = 50):
        self._lock = threading.Lock()
        self._counters: dict[str, int] = {}
        self._errors: deque[str] = deque(maxlen=max_errors)

    def count(self, key: str, n: int = 1) -> None:
        with self._lock:
            self._counters[key] = self._counters.get(key, 0) + n

    def error(self, code: str, detail: str = "") -> None:
        note = f"{code}: {detail}" if detail else code
        with self._lock:
            self._counters[code] = self._counters.get(code, 0) + 1
            self._errors.append(note)

    def counters(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counters)

    def last_errors(self) -> list[str]:
        with self._lock:
            return list(self._errors)

    def snapshot(self) -> dict:
        with self._lock:
            return {"counters": dict(self._counters), "last_errors": list(self._errors)}
