"""Frame sources: replay files, a live local socket, and standard input.

All three carry the same comma-separated record layout (header row first),
so one parser serves every path. Duplicate or out-of-order frame indices are
dropped with a telemetry error rather than killing the stream: live sources
hiccup. The live socket reader runs in its own thread and hands frames
across a bounded queue (drop-oldest on overflow, counted).
"""

from __future__ import annotations

import io
import logging
import os
import socket
import sys
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

from .frames import AUFrame, RecordLayout, RecordParseError, format_header_line, format_record_line
from .telemetry import Telemetry

log = logging.getLogger(__name__)

REPLAY_FILE = "replay-file"
LIVE_SOCKET = "live-socket"
STANDARD_INPUT = "standard-input"

LIVE_QUEUE_CAPACITY = 64


class SourceOpenError(OSError):
    """The stream source could not be opened."""


@dataclass(frozen=True)
class StreamSource:
    kind: str
    locator: str = ""
    fps_override: float | None = None

    def __post_init__(self):
        if self.kind not in (REPLAY_FILE, LIVE_SOCKET, STANDARD_INPUT):
            raise ValueError(f"unknown stream kind {self.kind!r}")
        if self.fps_override is not None and self.fps_override <= 0:
            raise ValueError("fps_override must be positive")


class FrameStream:
    """A stream handle; owned by a single consumer."""

    def __init__(self, telemetry: Telemetry | None = None):
        self.telemetry = telemetry or Telemetry()
        self._last_index: int | None = None

    def _admit(self, frame: AUFrame) -> bool:
        """Enforce strictly increasing frame_index; drops are telemetry errors."""
        if self._last_index is not None and frame.frame_index <= self._last_index:
            self.telemetry.error(
                "stream-order",
                f"frame_index {frame.frame_index} after {self._last_index}; frame dropped",
            )
            return False
        self._last_index = frame.frame_index
        return True

    def next_frame(self, timeout: float | None = None) -> AUFrame | None:
        """Next frame, or None at end of stream. Raises TimeoutError if a
        live source produced nothing within ``timeout`` seconds."""
        raise NotImplementedError

    def __iter__(self) -> Iterator[AUFrame]:
        while True:
            frame = self.next_frame()
            if frame is None:
                return
            yield frame

    def close(self) -> None:
        pass


class _RecordReader:
    """Parses header + record lines arriving one at a time."""

    def __init__(self, telemetry: Telemetry):
        self.telemetry = telemetry
        self.layout: RecordLayout | None = None
        self.row_index = 0

    def feed_line(self, line: str) -> AUFrame | None:
        line = line.strip()
        if not line:
            return None
        fields = line.split(",")
        if self.layout is None:
            self.layout = RecordLayout.from_header(fields)
            return None
        self.row_index += 1
        try:
            return self.layout.parse_row(fields, self.row_index)
        except RecordParseError as exc:
            self.telemetry.error("record-parse", str(exc))
            return None


class ReplayFileStream(FrameStream):
    """Replays a recorded tracker file, paced to its timestamps by default."""

    def __init__(
        self,
        path: str | Path,
        fps_override: float | None = None,
        realtime: bool = True,
        telemetry: Telemetry | None = None,
    ):
        super().__init__(telemetry)
        try:
            self._fh: IO[str] = open(path, encoding="utf-8")
        except OSError as exc:
            raise SourceOpenError(f"cannot open replay file {path}: {exc}") from exc
        self._reader = _RecordReader(self.telemetry)
        self._realtime = realtime
        self._fps_override = fps_override
        self._wall_start: float | None = None
        self._first_ts_ms: int | None = None
        self._position = 0

    def _pace(self, frame: AUFrame) -> None:
        now = time.monotonic()
        if self._wall_start is None:
            self._wall_start = now
            self._first_ts_ms = frame.timestamp_ms
            return
        if self._fps_override is not None:
            target = self._wall_start + self._position / self._fps_override
        else:
            target = self._wall_start + (frame.timestamp_ms - self._first_ts_ms) / 1000.0
        delay = target - now
        if delay > 0:
            time.sleep(delay)

    def next_frame(self, timeout: float | None = None) -> AUFrame | None:
        while True:
            if self._fh.closed:
                return None
            line = self._fh.readline()
            if not line:
                return None
            frame = self._reader.feed_line(line)
            if frame is None or not self._admit(frame):
                continue
            if self._realtime:
                self._pace(frame)
            self._position += 1
            return frame

    def close(self) -> None:
        self._fh.close()


class StdinStream(FrameStream):
    def __init__(self, fh: IO[str] | None = None, telemetry: Telemetry | None = None):
        super().__init__(telemetry)
        self._fh = fh if fh is not None else sys.stdin
        self._reader = _RecordReader(self.telemetry)

    def next_frame(self, timeout: float | None = None) -> AUFrame | None:
        while True:
            line = self._fh.readline()
            if not line:
                return None
            frame = self._reader.feed_line(line)
            if frame is not None and self._admit(frame):
                return frame


class LiveSocketStream(FrameStream):
    """Listens on a local TCP or unix socket for newline-delimited records.

    Each connecting writer sends the header row first. The reader thread
    parses lines and pushes frames to a bounded queue; on overflow the
    oldest frame is dropped and counted.
    """

    def __init__(self, locator: str, telemetry: Telemetry | None = None):
        super().__init__(telemetry)
        self._queue: deque[AUFrame] = deque()
        self._cond = threading.Condition()
        self._closed = False
        try:
            if "/" in locator or os.sep in locator:
                self._family = socket.AF_UNIX
                self._path = locator
                if os.path.exists(locator):
                    os.unlink(locator)
                self._server = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
                self._server.bind(locator)
            else:
                host, _, port = locator.rpartition(":")
                self._family = socket.AF_INET
                self._path = None
                self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
                self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
                self._server.bind((host or "127.0.0.1", int(port)))
            self._server.settimeout(0.2)
            self._server.listen(1)
        except (OSError, ValueError) as exc:
            raise SourceOpenError(f"cannot listen on {locator!r}: {exc}") from exc
        self._thread = threading.Thread(target=self._read_loop, name="facekey-live-reader", daemon=True)
        self._thread.start()

    @property
    def address(self) -> tuple[str, int] | str:
        if self._family == socket.AF_UNIX:
            return self._path
        return self._server.getsockname()

    def _read_loop(self) -> None:
        while not self._closed:
            try:
                conn, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            reader = _RecordReader(self.telemetry)  # each writer resends the header
            with conn:
                conn.settimeout(0.2)
                buf = b""
                while not self._closed:
                    try:
                        chunk = conn.recv(4096)
                    except socket.timeout:
                        continue
                    except OSError:
                        break
                    if not chunk:
                        break
                    buf += chunk
                    while b"\n" in buf:
                        line, buf = buf.split(b"\n", 1)
                        try:
                            frame = reader.feed_line(line.decode("utf-8"))
                        except Exception as exc:
                            self.telemetry.error("record-parse", str(exc))
                            continue
                        if frame is not None:
                            self._push(frame)

    def _push(self, frame: AUFrame) -> None:
        with self._cond:
            if len(self._queue) >= LIVE_QUEUE_CAPACITY:
                self._queue.popleft()
                self.telemetry.count("live-queue-dropped")
            self._queue.append(frame)
            self._cond.notify()

    def next_frame(self, timeout: float | None = None) -> AUFrame | None:
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            while True:
                while self._queue:
                    frame = self._queue.popleft()
                    if self._admit(frame):
                        return frame
                if self._closed:
                    return None
                if deadline is None:
                    self._cond.wait(0.5)
                else:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        raise TimeoutError("no frame within timeout")
                    self._cond.wait(remaining)

    def close(self) -> None:
        self._closed = True
        with self._cond:
            self._cond.notify_all()
        try:
            self._server.close()
        except OSError:
            pass
        self._thread.join(timeout=2.0)
        if self._family == socket.AF_UNIX and self._path and os.path.exists(self._path):
            os.unlink(self._path)


def open_stream(
    source: StreamSource,
    telemetry: Telemetry | None = None,
    realtime: bool = True,
    stdin: IO[str] | None = None,
) -> FrameStream:
    if source.kind == REPLAY_FILE:
        return ReplayFileStream(
            source.locator,
            fps_override=source.fps_override,
            realtime=realtime,
            telemetry=telemetry,
        )
    if source.kind == LIVE_SOCKET:
        return LiveSocketStream(source.locator, telemetry=telemetry)
    return StdinStream(fh=stdin, telemetry=telemetry)


# ---------------------------------------------------------------------------
# replay-file helpers

def write_frames_csv(path: str | Path, frames: Iterable[AUFrame]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_header_line() + "\n")
        for frame in frames:
            fh.write(format_record_line(frame) + "\n")
            count += 1
    return count


def read_frames_csv(path: str | Path, telemetry: Telemetry | None = None) -> list[AUFrame]:
    stream = ReplayFileStream(path, realtime=False, telemetry=telemetry)
    try:
        return list(stream)
    finally:
        stream.close()


def frames_csv_text(frames: Iterable[AUFrame]) -> str:
    out = io.StringIO()
    out.write(format_header_line() + "\n")
    for frame in frames:
        out.write(format_record_line(frame) + "\n")
    return out.getvalue()
