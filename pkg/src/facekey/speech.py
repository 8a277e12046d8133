"""Speech keyword channel: transcript normalization, matching, staleness gating.

The recognizer itself is external; it delivers plain-text transcripts with
the time speech ended. Cloud recognizers can lag by seconds, so transcripts
older than ``staleness_ms`` are dropped instead of firing long-gone commands.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

from .actions import Action

DEFAULT_STALENESS_MS = 2000

_PUNCTUATION_TABLE = str.maketrans("", "", string.punctuation)


@dataclass(frozen=True)
class TranscriptEvent:
    text: str
    spoken_end_ms: int
    received_ms: int

    def __post_init__(self):
        if self.received_ms < 0:
            raise ValueError("received_ms must be >= 0")


@dataclass(frozen=True)
class KeywordBinding:
    phrase: str
    action: Action

    def __post_init__(self):
        if not self.phrase or self.phrase != self.phrase.lower() or " " in self.phrase:
            raise ValueError(f"keyword phrase must be a single lowercase word, got {self.phrase!r}")


def normalize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return text.lower().translate(_PUNCTUATION_TABLE).split()


def match_keywords(tokens: list[str], bindings: list[KeywordBinding]) -> list[Action]:
    """One action per token that exactly equals a bound phrase, in token order."""
    by_phrase = {b.phrase: b.action for b in bindings}
    return [by_phrase[token] for token in tokens if token in by_phrase]


def admit(event: TranscriptEvent, now_ms: int, staleness_ms: int = DEFAULT_STALENESS_MS) -> bool:
    """Accept a transcript unless it is older than the staleness budget (inclusive)."""
    return now_ms - event.spoken_end_ms <= staleness_ms


def parse_transcript_line(line: str, received_ms: int) -> TranscriptEvent:
    """Wire format for the transcript socket: ``spoken_end_ms<TAB>text``."""
    spoken_raw, _, text = line.rstrip("\n").partition("\t")
    return TranscriptEvent(text=text, spoken_end_ms=int(spoken_raw), received_ms=received_ms)
