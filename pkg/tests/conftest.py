"""Shared helpers: frame construction, random profiles, acceptance report."""

from __future__ import annotations

import random

# verdicts recorded by tests/test_acceptance.py, one entry per criterion
ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"[acceptance] {name}: {verdict}")

from facekey.actions import Action, MacroDefinition, MacroStep
from facekey.aus import AU_IDS
from facekey.frames import AUFrame
from facekey.profiles import EngineParams, ModeConfig, Profile
from facekey.rules import AUCondition, ExpressionRule, Rearm
from facekey.speech import KeywordBinding


def make_frame(
    frame_index: int = 0,
    timestamp_ms: int | None = None,
    confidence: float = 0.99,
    intensity: dict[int, float] | None = None,
    presence: dict[int, bool] | None = None,
) -> AUFrame:
    full_intensity = {au: 0.0 for au in AU_IDS}
    full_presence = {au: False for au in AU_IDS}
    if intensity:
        full_intensity.update(intensity)
        for au, value in intensity.items():
            if value > 0:
                full_presence[au] = True
    if presence:
        full_presence.update(presence)
    return AUFrame(
        frame_index=frame_index,
        timestamp_ms=frame_index * 33 if timestamp_ms is None else timestamp_ms,
        confidence=confidence,
        presence=full_presence,
        intensity=full_intensity,
    )


def frames_for_rule(rule: ExpressionRule, matches: list[bool], confidence: float = 0.99) -> list[AUFrame]:
    """Frame sequence where frame i satisfies the rule iff matches[i]."""
    frames = []
    for i, m in enumerate(matches):
        intensity: dict[int, float] = {}
        presence: dict[int, bool] = {}
        if m:
            for cond in rule.conditions:
                if cond.threshold is not None:
                    intensity[cond.au_id] = min(cond.threshold + 0.5, 5.0)
                else:
                    presence[cond.au_id] = True
        frames.append(make_frame(i, confidence=confidence, intensity=intensity, presence=presence))
    return frames


# ---------------------------------------------------------------------------
# random valid profiles, for round-trip and referential-integrity tests

_KEY_POOL = [str(i) for i in range(1, 10)] + ["a", "d", "w", "s", "space"]
_CONDITION_AUS = [au for au in AU_IDS if au not in (14, 17, 20, 45)]


def random_profile(rng: random.Random) -> Profile:
    key_space = rng.sample(_KEY_POOL, rng.randint(2, 6))
    n_rules = rng.randint(1, 6)
    rules = []
    for i in range(n_rules):
        n_conds = rng.randint(2, 3)
        aus = rng.sample(_CONDITION_AUS, n_conds)
        conditions = []
        for au in aus:
            if rng.random() < 0.3:
                conditions.append(AUCondition.presence(au))
            else:
                threshold = round(rng.uniform(0.05, 4.95), 2)
                conditions.append(AUCondition.intensity_above(au, threshold))
        rearm = (
            Rearm("release") if rng.random() < 0.7 else Rearm("refractory", rng.randint(0, 10))
        )
        rules.append(
            ExpressionRule(
                rule_id=f"rule-{i}",
                conditions=tuple(conditions),
                display_name=f"Rule {i}",
                frame_threshold=rng.randint(1, 8),
                rearm=rearm,
                priority=rng.randint(-2, 5),
                min_confidence=round(rng.uniform(0.0, 1.0), 3),
            )
        )
    macros = []
    for i in range(rng.randint(0, 2)):
        steps = tuple(
            MacroStep(rng.choice(key_space), rng.randint(0, 80), rng.randint(0, 40))
            for _ in range(rng.randint(1, 4))
        )
        macros.append(MacroDefinition(f"macro-{i}", steps))
    mode_ids = [f"mode-{i}" for i in range(rng.randint(1, 3))]
    modes = {}
    for mode_id in mode_ids:
        bindings = {}
        for rule in rules:
            if rng.random() < 0.8:
                bindings[rule.rule_id] = _random_action(rng, key_space, macros, mode_ids)
        keywords = []
        phrases = rng.sample(["yes", "no", "walk", "stop", "pause", "jump"], rng.randint(0, 3))
        for phrase in phrases:
            keywords.append(KeywordBinding(phrase, _random_action(rng, key_space, macros, mode_ids)))
        modes[mode_id] = ModeConfig(bindings=bindings, keywords=tuple(keywords))
    return Profile(
        name=f"generated-{rng.randrange(10**6)}",
        key_space=tuple(key_space),
        rules=tuple(rules),
        modes=modes,
        initial_mode=rng.choice(mode_ids),
        macros=tuple(macros),
        engine_params=EngineParams(
            frame_threshold=rng.randint(1, 8),
            min_confidence=round(rng.uniform(0.0, 1.0), 3),
            tap_hold_ms=rng.randint(0, 200),
            staleness_ms=rng.randint(0, 5000),
        ),
    )


def _random_action(rng: random.Random, key_space, macros, mode_ids) -> Action:
    kinds = ["tap", "toggle"]
    if macros:
        kinds.append("macro")
    if len(mode_ids) > 1:
        kinds.append("switch_mode")
    kind = rng.choice(kinds)
    if kind in ("tap", "toggle"):
        return Action(kind, rng.choice(key_space))
    if kind == "macro":
        return Action("macro", rng.choice(macros).macro_id)
    return Action("switch_mode", rng.choice(mode_ids))
