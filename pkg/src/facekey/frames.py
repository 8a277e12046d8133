"""AU frame model and tracker-record parsing.

The upstream face tracker emits one record per video frame: a frame index,
a timestamp (seconds), its own tracking confidence, and per-AU intensity
(``AUxx_r``, 0..5) and presence (``AUxx_c``, 0/1) columns. One parser serves
replay files, live sockets, and stdin, which all carry the same layout.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .aus import AU_IDS, INTENSITY_MAX, INTENSITY_MIN


class HeaderError(ValueError):
    """A mandatory column is missing from the record header."""


class RecordParseError(ValueError):
    """A record field could not be parsed; names the column and row."""

    def __init__(self, message: str, column: str = "", row_index: int | None = None):
        self.column = column
        self.row_index = row_index
        where = f" (column {column!r}" if column else ""
        if row_index is not None:
            where += f", row {row_index}" if where else f" (row {row_index}"
        if where:
            where += ")"
        super().__init__(message + where)


@dataclass(frozen=True)
class AUFrame:
    """One timestamped tracker sample over the fixed AU set."""

    frame_index: int
    timestamp_ms: int
    confidence: float
    presence: dict[int, bool]
    intensity: dict[int, float]

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        if self.timestamp_ms < 0:
            raise ValueError(f"timestamp_ms must be >= 0, got {self.timestamp_ms}")


def neutral_frame(frame_index: int = 0, timestamp_ms: int = 0, confidence: float = 1.0) -> AUFrame:
    """Frame with every AU absent and all intensities at zero."""
    return AUFrame(
        frame_index=frame_index,
        timestamp_ms=timestamp_ms,
        confidence=confidence,
        presence={au: False for au in AU_IDS},
        intensity={au: 0.0 for au in AU_IDS},
    )


_AU_COLUMN = re.compile(r"^AU(\d{2})_([rc])$")

MANDATORY_COLUMNS = ("frame", "timestamp", "confidence")


def _clamp(value: float, lo: float, hi: float) -> float:
    if value < lo:
        return lo
    if value > hi:
        return hi
    return value


def _parse_float(raw: str, column: str, row_index: int | None) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise RecordParseError(f"malformed numeric field {raw!r}", column, row_index) from None
    if math.isnan(value):
        raise RecordParseError("field is NaN", column, row_index)
    return value


@dataclass(frozen=True)
class RecordLayout:
    """Pre-resolved column positions for one header row.

    Resolving once per stream keeps per-record parsing cheap; tracker
    headers may carry extra columns (pose, gaze) which are ignored, and AU
    columns may have leading whitespace after the comma.
    """

    frame_col: int
    timestamp_col: int
    confidence_col: int
    intensity_cols: tuple[tuple[int, int], ...]  # (au_id, column index)
    presence_cols: tuple[tuple[int, int], ...]
    width: int

    @classmethod
    def from_header(cls, header: list[str]) -> "RecordLayout":
        names = [h.strip() for h in header]
        positions = {name: i for i, name in enumerate(names)}
        missing = [c for c in MANDATORY_COLUMNS if c not in positions]
        if missing:
            raise HeaderError(f"header is missing mandatory column(s): {', '.join(missing)}")
        intensity: list[tuple[int, int]] = []
        presence: list[tuple[int, int]] = []
        for i, name in enumerate(names):
            m = _AU_COLUMN.match(name)
            if not m:
                continue
            au = int(m.group(1))
            if au not in AU_IDS:
                continue
            if m.group(2) == "r":
                intensity.append((au, i))
            else:
                presence.append((au, i))
        return cls(
            frame_col=positions["frame"],
            timestamp_col=positions["timestamp"],
            confidence_col=positions["confidence"],
            intensity_cols=tuple(intensity),
            presence_cols=tuple(presence),
            width=len(names),
        )

    def parse_row(self, row: list[str], row_index: int | None = None) -> AUFrame:
        if len(row) != self.width:
            raise RecordParseError(
                f"row has {len(row)} fields, header has {self.width}", row_index=row_index
            )
        frame_raw = row[self.frame_col].strip()
        try:
            frame_index = int(float(frame_raw))
        except ValueError:
            raise RecordParseError(
                f"malformed frame index {frame_raw!r}", "frame", row_index
            ) from None
        if frame_index < 0:
            raise RecordParseError(f"negative frame index {frame_index}", "frame", row_index)
        seconds = _parse_float(row[self.timestamp_col].strip(), "timestamp", row_index)
        if seconds < 0:
            raise RecordParseError(f"negative timestamp {seconds}", "timestamp", row_index)
        confidence = _clamp(
            _parse_float(row[self.confidence_col].strip(), "confidence", row_index), 0.0, 1.0
        )
        intensity = {au: 0.0 for au in AU_IDS}
        presence = {au: False for au in AU_IDS}
        for au, col in self.intensity_cols:
            value = _parse_float(row[col].strip(), f"AU{au:02d}_r", row_index)
            intensity[au] = _clamp(value, INTENSITY_MIN, INTENSITY_MAX)
        for au, col in self.presence_cols:
            value = _parse_float(row[col].strip(), f"AU{au:02d}_c", row_index)
            presence[au] = value >= 0.5
        return AUFrame(
            frame_index=frame_index,
            timestamp_ms=round(seconds * 1000.0),
            confidence=confidence,
            presence=presence,
            intensity=intensity,
        )


def parse_tracker_record(header: list[str], row: list[str], row_index: int | None = None) -> AUFrame:
    """Parse one tracker record given its header; see :class:`RecordLayout`."""
    return RecordLayout.from_header(header).parse_row(row, row_index)


def canonical_header() -> list[str]:
    cols = list(MANDATORY_COLUMNS)
    cols += [f"AU{au:02d}_r" for au in AU_IDS]
    cols += [f"AU{au:02d}_c" for au in AU_IDS]
    return cols


def serialize_frame(frame: AUFrame) -> list[str]:
    """Render a frame as a row under :func:`canonical_header`, floats at 6 decimals."""
    row = [
        str(frame.frame_index),
        f"{frame.timestamp_ms / 1000.0:.6f}",
        f"{frame.confidence:.6f}",
    ]
    row += [f"{frame.intensity[au]:.6f}" for au in AU_IDS]
    row += ["1.000000" if frame.presence[au] else "0.000000" for au in AU_IDS]
    return row


def format_record_line(frame: AUFrame) -> str:
    return ",".join(serialize_frame(frame))


def format_header_line() -> str:
    return ",".join(canonical_header())
