"""Expression rules: AU conditions, consecutive-frame debouncing, arbitration.

A rule is a conjunction of AU conditions; it fires after its conditions have
held for ``frame_threshold`` consecutive frames, then re-arms according to
its rearm policy. When several rules fire on the same frame, at most one
wins and the rest are reset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .aus import AU_ID_SET, INTENSITY_MAX, INTENSITY_MIN
from .frames import AUFrame

PRESENCE = "presence"
INTENSITY_ABOVE = "intensity_above"

RELEASE = "release"
REFRACTORY = "refractory"

DEFAULT_FRAME_THRESHOLD = 5
DEFAULT_MIN_CONFIDENCE = 0.75


@dataclass(frozen=True)
class AUCondition:
    """Single conjunct: AU present, or AU intensity strictly above a threshold."""

    au_id: int
    mode: str
    threshold: float | None = None

    def __post_init__(self):
        if self.au_id not in AU_ID_SET:
            raise ValueError(f"unknown AU id {self.au_id}")
        if self.mode == PRESENCE:
            if self.threshold is not None:
                raise ValueError("presence condition takes no threshold")
        elif self.mode == INTENSITY_ABOVE:
            if self.threshold is None or not (INTENSITY_MIN < self.threshold < INTENSITY_MAX):
                raise ValueError(
                    f"intensity threshold must be strictly inside (0, 5), got {self.threshold}"
                )
        else:
            raise ValueError(f"unknown condition mode {self.mode!r}")

    @staticmethod
    def presence(au_id: int) -> "AUCondition":
        return AUCondition(au_id, PRESENCE)

    @staticmethod
    def intensity_above(au_id: int, threshold: float) -> "AUCondition":
        return AUCondition(au_id, INTENSITY_ABOVE, threshold)


@dataclass(frozen=True)
class Rearm:
    """When a fired rule may fire again.

    ``release``: not before a non-matching frame (expression released).
    ``refractory``: after ``refractory_frames`` frames have elapsed.
    """

    policy: str = RELEASE
    refractory_frames: int = 0

    def __post_init__(self):
        if self.policy not in (RELEASE, REFRACTORY):
            raise ValueError(f"unknown rearm policy {self.policy!r}")
        if self.refractory_frames < 0:
            raise ValueError("refractory_frames must be >= 0")


RELEASE_REQUIRED = Rearm(RELEASE)


def refractory(n_frames: int) -> Rearm:
    return Rearm(REFRACTORY, n_frames)


@dataclass(frozen=True)
class ExpressionRule:
    rule_id: str
    conditions: tuple[AUCondition, ...]
    display_name: str = ""
    frame_threshold: int = DEFAULT_FRAME_THRESHOLD
    rearm: Rearm = RELEASE_REQUIRED
    priority: int = 0
    min_confidence: float = DEFAULT_MIN_CONFIDENCE

    def __post_init__(self):
        if not self.rule_id:
            raise ValueError("rule_id must be non-empty")
        if not self.conditions:
            raise ValueError("conditions must be non-empty")
        if self.frame_threshold < 1:
            raise ValueError(f"frame_threshold must be >= 1, got {self.frame_threshold}")
        if not (0.0 <= self.min_confidence <= 1.0):
            raise ValueError(f"min_confidence must be in [0, 1], got {self.min_confidence}")
        if not self.display_name:
            object.__setattr__(self, "display_name", self.rule_id)
        if not isinstance(self.conditions, tuple):
            object.__setattr__(self, "conditions", tuple(self.conditions))


def eval_condition(cond: AUCondition, frame: AUFrame) -> bool:
    if cond.mode == PRESENCE:
        return frame.presence[cond.au_id]
    return frame.intensity[cond.au_id] > cond.threshold  # strictly greater


def eval_rule(rule: ExpressionRule, frame: AUFrame) -> bool:
    """Conjunction of all conditions, gated on tracker confidence."""
    if frame.confidence < rule.min_confidence:
        return False
    for cond in rule.conditions:
        if not eval_condition(cond, frame):
            return False
    return True


@dataclass
class DebounceState:
    consecutive_count: int = 0
    armed: bool = True
    refractory_remaining: int = 0

    def copy(self) -> "DebounceState":
        return DebounceState(self.consecutive_count, self.armed, self.refractory_remaining)

    def reset(self) -> None:
        self.consecutive_count = 0
        self.armed = True
        self.refractory_remaining = 0

    def step(self, matched: bool, frame_threshold: int, rearm: Rearm) -> bool:
        """Advance one frame; returns True exactly when the rule fires.

        The refractory countdown runs every frame, matched or not. A fire
        under ``release`` disarms until a non-matching frame; under
        ``refractory`` it zeroes the count and starts the countdown.
        """
        if self.refractory_remaining:
            self.refractory_remaining -= 1
            if self.refractory_remaining == 0:
                self.armed = True
        if matched:
            count = self.consecutive_count + 1
            if count > frame_threshold:
                count = frame_threshold
            self.consecutive_count = count
            if count == frame_threshold and self.armed:
                if rearm.policy == RELEASE:
                    self.armed = False
                else:
                    self.consecutive_count = 0
                    self.refractory_remaining = rearm.refractory_frames
                    self.armed = rearm.refractory_frames == 0
                return True
        else:
            self.consecutive_count = 0
            if rearm.policy == RELEASE:
                self.armed = True
        return False


def debounce_step(
    state: DebounceState, matched: bool, rule: ExpressionRule
) -> tuple[DebounceState, bool]:
    """Pure form of :meth:`DebounceState.step`: returns (new state, fired)."""
    nxt = state.copy()
    fire = nxt.step(matched, rule.frame_threshold, rule.rearm)
    return nxt, fire


def arbitrate(fired: Iterable[str], rules: Mapping[str, ExpressionRule]) -> str | None:
    """Pick at most one winner: highest priority, ties to lexicographically
    smallest rule_id."""
    winner: str | None = None
    for rule_id in fired:
        rule = rules[rule_id]
        if winner is None:
            winner = rule_id
            continue
        best = rules[winner]
        if rule.priority > best.priority or (
            rule.priority == best.priority and rule_id < winner
        ):
            winner = rule_id
    return winner


@dataclass
class EngineStep:
    """Outcome of one frame: at most one trigger plus a telemetry snapshot."""

    triggers: list[str]
    telemetry: dict[str, tuple[bool, int]]  # rule_id -> (matched, consecutive_count)


class RuleEngine:
    """Deterministic per-frame evaluator for one profile's rule set.

    Rules outside ``active_rule_ids`` (unbound in the current mode) are still
    evaluated and debounced, but a fire from one is suppressed and reset,
    exactly like an arbitration loser; only active rules can trigger.
    """

    def __init__(
        self,
        rules: Sequence[ExpressionRule],
        active_rule_ids: Iterable[str] | None = None,
    ):
        seen: set[str] = set()
        for rule in rules:
            if rule.rule_id in seen:
                raise ValueError(f"duplicate rule_id {rule.rule_id!r}")
            seen.add(rule.rule_id)
        self._rules = {r.rule_id: r for r in rules}
        # flat per-rule records for the hot loop
        self._recs = [
            (
                r.rule_id,
                tuple(
                    (c.au_id, c.mode == INTENSITY_ABOVE, c.threshold) for c in r.conditions
                ),
                r.frame_threshold,
                r.rearm,
                r.min_confidence,
                DebounceState(),
            )
            for r in rules
        ]
        self._active: set[str] = (
            set(self._rules) if active_rule_ids is None else set(active_rule_ids)
        )
        self.total_fires: dict[str, int] = {r.rule_id: 0 for r in rules}

    @property
    def rules(self) -> dict[str, ExpressionRule]:
        return dict(self._rules)

    @property
    def active_rule_ids(self) -> set[str]:
        return set(self._active)

    def set_active(self, rule_ids: Iterable[str]) -> None:
        self._active = set(rule_ids)

    def state_of(self, rule_id: str) -> DebounceState:
        for rid, _, _, _, _, state in self._recs:
            if rid == rule_id:
                return state.copy()
        raise KeyError(rule_id)

    def reset(self) -> None:
        for rec in self._recs:
            rec[5].reset()

    def step(self, frame: AUFrame) -> EngineStep:
        confidence = frame.confidence
        intensity = frame.intensity
        presence = frame.presence
        fired: list[str] = []
        matched_flags: list[bool] = []
        for rule_id, conds, threshold, rearm, min_conf, state in self._recs:
            if confidence >= min_conf:
                matched = True
                for au, is_intensity, limit in conds:
                    if is_intensity:
                        if intensity[au] <= limit:
                            matched = False
                            break
                    elif not presence[au]:
                        matched = False
                        break
            else:
                matched = False
            matched_flags.append(matched)
            if state.step(matched, threshold, rearm):
                fired.append(rule_id)

        winner: str | None = None
        if fired:
            winner = arbitrate((r for r in fired if r in self._active), self._rules)
            for rule_id in fired:
                if rule_id != winner:
                    # suppressed: back to zero and armed
                    for rec in self._recs:
                        if rec[0] == rule_id:
                            rec[5].reset()
                            break
            if winner is not None:
                self.total_fires[winner] += 1

        snapshot = {
            rec[0]: (matched_flags[i], rec[5].consecutive_count)
            for i, rec in enumerate(self._recs)
        }
        return EngineStep(triggers=[winner] if winner else [], telemetry=snapshot)
