"""Key-event synthesis: tap/toggle/macro/mode-switch semantics.

Actions are executed synchronously and produce *scheduled* key events
(timestamps may lie in the future, e.g. a tap's release or a macro tail).
Delivery order is handled by the event scheduler in :mod:`facekey.sinks`.
Per-key edge alternation (Down/Up/Down/...) is enforced here: an action that
would double-press or double-release a key is dropped with a telemetry note.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

DOWN = "down"
UP = "up"

SOURCE_FACE = "face"
SOURCE_SPEECH = "speech"
SOURCE_MACRO = "macro"

TAP = "tap"
TOGGLE = "toggle"
MACRO = "macro"
SWITCH_MODE = "switch_mode"

DEFAULT_TAP_HOLD_MS = 50


@dataclass(frozen=True)
class KeyEvent:
    key: str
    edge: str
    timestamp_ms: int
    source: str

    def as_line(self) -> str:
        return f"{self.timestamp_ms},{self.key},{self.edge},{self.source}"

    @staticmethod
    def from_line(line: str) -> "KeyEvent":
        ts, key, edge, source = line.rstrip("\n").split(",")
        return KeyEvent(key=key, edge=edge, timestamp_ms=int(ts), source=source)


@dataclass(frozen=True)
class Action:
    kind: str
    target: str

    def __post_init__(self):
        if self.kind not in (TAP, TOGGLE, MACRO, SWITCH_MODE):
            raise ValueError(f"unknown action kind {self.kind!r}")
        if not self.target:
            raise ValueError("action target must be non-empty")


def tap(key: str) -> Action:
    return Action(TAP, key)


def toggle(key: str) -> Action:
    return Action(TOGGLE, key)


def macro(macro_id: str) -> Action:
    return Action(MACRO, macro_id)


def switch_mode(mode_id: str) -> Action:
    return Action(SWITCH_MODE, mode_id)


@dataclass(frozen=True)
class MacroStep:
    key: str
    down_ms: int
    gap_ms: int = 0

    def __post_init__(self):
        if self.down_ms < 0 or self.gap_ms < 0:
            raise ValueError("macro step timings must be >= 0")


@dataclass(frozen=True)
class MacroDefinition:
    macro_id: str
    steps: tuple[MacroStep, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("macro steps must be non-empty")
        if not isinstance(self.steps, tuple):
            object.__setattr__(self, "steps", tuple(self.steps))


class BindingResolutionError(KeyError):
    """An action referenced a key, macro, or mode the profile does not define."""


def expand_macro(definition: MacroDefinition, start_ms: int, source: str = SOURCE_MACRO) -> list[KeyEvent]:
    """Prefix-sum expansion of (down_ms, gap_ms) steps into Down/Up events."""
    events: list[KeyEvent] = []
    cursor = start_ms
    for step in definition.steps:
        events.append(KeyEvent(step.key, DOWN, cursor, source))
        events.append(KeyEvent(step.key, UP, cursor + step.down_ms, source))
        cursor += step.down_ms + step.gap_ms
    return events


class ActionEngine:
    """Holds key/macro/mode state and turns actions into scheduled events."""

    def __init__(
        self,
        initial_mode: str,
        macros: dict[str, MacroDefinition] | None = None,
        tap_hold_ms: int = DEFAULT_TAP_HOLD_MS,
        note: Callable[[str, str], None] | None = None,
    ):
        self.active_mode = initial_mode
        self.tap_hold_ms = tap_hold_ms
        self._macros = dict(macros or {})
        # key -> source that pressed it (toggles only)
        self._held: dict[str, str] = {}
        # key -> (edge, timestamp) of the latest *scheduled* event
        self._last_edge: dict[str, tuple[str, int]] = {}
        self._active_macro: tuple[str, int] | None = None  # (macro_id, end_ms)
        self._note = note or (lambda code, detail: None)

    @property
    def held_keys(self) -> set[str]:
        return set(self._held)

    def _key_free(self, key: str, now_ms: int) -> bool:
        last = self._last_edge.get(key)
        return last is None or (last[0] == UP and last[1] <= now_ms)

    def _emit(self, key: str, edge: str, at_ms: int, source: str) -> KeyEvent:
        self._last_edge[key] = (edge, at_ms)
        return KeyEvent(key, edge, at_ms, source)

    def execute(self, action: Action, now_ms: int, source: str = SOURCE_FACE) -> list[KeyEvent]:
        if action.kind == TAP:
            return self._tap(action.target, now_ms, source)
        if action.kind == TOGGLE:
            return self._toggle(action.target, now_ms, source)
        if action.kind == MACRO:
            return self._macro(action.target, now_ms)
        if action.kind == SWITCH_MODE:
            return self._switch_mode(action.target, now_ms)
        raise BindingResolutionError(action.kind)

    def _tap(self, key: str, now_ms: int, source: str) -> list[KeyEvent]:
        if not self._key_free(key, now_ms):
            self._note("tap-dropped", f"key {key!r} busy")
            return []
        return [
            self._emit(key, DOWN, now_ms, source),
            self._emit(key, UP, now_ms + self.tap_hold_ms, source),
        ]

    def _toggle(self, key: str, now_ms: int, source: str) -> list[KeyEvent]:
        if key in self._held:
            release_source = self._held.pop(key)
            return [self._emit(key, UP, now_ms, release_source)]
        if not self._key_free(key, now_ms):
            self._note("toggle-dropped", f"key {key!r} busy")
            return []
        self._held[key] = source
        return [self._emit(key, DOWN, now_ms, source)]

    def _macro(self, macro_id: str, now_ms: int) -> list[KeyEvent]:
        definition = self._macros.get(macro_id)
        if definition is None:
            raise BindingResolutionError(macro_id)
        if self._active_macro is not None and now_ms < self._active_macro[1]:
            self._note("macro-ignored", f"{macro_id!r} fired while {self._active_macro[0]!r} in flight")
            return []
        keys = {step.key for step in definition.steps}
        if not all(self._key_free(k, now_ms) for k in keys):
            self._note("macro-dropped", f"{macro_id!r} uses a busy key")
            return []
        events = expand_macro(definition, now_ms)
        for event in events:
            self._last_edge[event.key] = (event.edge, event.timestamp_ms)
        end_ms = max(e.timestamp_ms for e in events)
        self._active_macro = (macro_id, end_ms)
        return events

    def _switch_mode(self, mode_id: str, now_ms: int) -> list[KeyEvent]:
        events = self.safety_release(now_ms)
        self.active_mode = mode_id
        return events

    def safety_release(self, now_ms: int) -> list[KeyEvent]:
        """Release every toggled key; macros are self-closing and untouched."""
        events = [
            self._emit(key, UP, now_ms, source)
            for key, source in sorted(self._held.items())
        ]
        self._held.clear()
        return events
