"""Profile documents: parsing, validation, canonical serialization, builtins.

A profile is one self-contained JSON document: symbolic key space,
expression rules, per-mode bindings and speech keywords, macros, and engine
parameters. Serialization is canonical (sorted keys, two-decimal AU
thresholds, explicit per-rule parameters) so that semantically equal
profiles produce byte-identical documents and diffs stay stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .actions import MACRO, SWITCH_MODE, TAP, TOGGLE, Action, MacroDefinition, MacroStep
from .aus import AU_ID_SET, BLINK_AU, UNRELIABLE_CONDITION_AUS
from .rules import PRESENCE, REFRACTORY, RELEASE, AUCondition, ExpressionRule, Rearm
from .speech import KeywordBinding

DEFAULT_ENGINE_PARAMS = {
    "frame_threshold": 5,
    "min_confidence": 0.75,
    "tap_hold_ms": 50,
    "staleness_ms": 2000,
}


@dataclass(frozen=True)
class EngineParams:
    frame_threshold: int = 5
    min_confidence: float = 0.75
    tap_hold_ms: int = 50
    staleness_ms: int = 2000


@dataclass(frozen=True)
class ModeConfig:
    bindings: dict[str, Action] = field(default_factory=dict)
    keywords: tuple[KeywordBinding, ...] = ()


@dataclass(frozen=True)
class Profile:
    name: str
    key_space: tuple[str, ...]
    rules: tuple[ExpressionRule, ...]
    modes: dict[str, ModeConfig]
    initial_mode: str
    macros: tuple[MacroDefinition, ...] = ()
    engine_params: EngineParams = EngineParams()

    def mode(self, mode_id: str) -> ModeConfig:
        return self.modes[mode_id]

    def rule(self, rule_id: str) -> ExpressionRule:
        for r in self.rules:
            if r.rule_id == rule_id:
                return r
        raise KeyError(rule_id)

    def macro(self, macro_id: str) -> MacroDefinition:
        for m in self.macros:
            if m.macro_id == macro_id:
                return m
        raise KeyError(macro_id)


@dataclass
class ParseResult:
    profile: Profile | None
    errors: list[str]
    warnings: list[str]

    @property
    def ok(self) -> bool:
        return self.profile is not None and not self.errors


# ---------------------------------------------------------------------------
# parsing / validation

_TOP_KEYS = {"name", "key_space", "engine_params", "rules", "macros", "modes", "initial_mode"}
_RULE_KEYS = {"rule_id", "display_name", "conditions", "frame_threshold", "rearm", "priority", "min_confidence"}
_ACTION_KINDS = {TAP: "tap", TOGGLE: "toggle", MACRO: "macro", SWITCH_MODE: "switch_mode"}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_num(value: Any) -> bool:
    return _is_int(value) or isinstance(value, float)


class _Collector:
    def __init__(self):
        self.errors: list[str] = []
        self.warnings: list[str] = []

    def error(self, msg: str) -> None:
        self.errors.append(msg)

    def warn(self, msg: str) -> None:
        self.warnings.append(msg)


def _parse_condition(raw: Any, where: str, out: _Collector) -> AUCondition | None:
    if not isinstance(raw, dict):
        out.error(f"{where}: condition must be an object")
        return None
    unknown = set(raw) - {"au", "presence", "above"}
    if unknown:
        out.error(f"{where}: unknown condition key(s): {', '.join(sorted(unknown))}")
        return None
    au = raw.get("au")
    if not _is_int(au):
        out.error(f"{where}: condition needs an integer 'au'")
        return None
    if au not in AU_ID_SET:
        out.error(f"{where}: AU{au} is not in the tracker's AU set")
        return None
    if au == BLINK_AU:
        out.error(f"{where}: AU45 (blink) is involuntary and cannot be used as a condition")
        return None
    if au in UNRELIABLE_CONDITION_AUS:
        out.warn(f"{where}: AU{au} is unreliably detected; consider a different AU")
    has_presence = "presence" in raw
    has_above = "above" in raw
    if has_presence == has_above:
        out.error(f"{where}: condition needs exactly one of 'presence' or 'above'")
        return None
    if has_presence:
        if raw["presence"] is not True:
            out.error(f"{where}: 'presence' must be true")
            return None
        return AUCondition.presence(au)
    threshold = raw["above"]
    if not _is_num(threshold):
        out.error(f"{where}: 'above' must be a number")
        return None
    threshold = round(float(threshold), 2)
    if not (0.0 < threshold < 5.0):
        out.error(f"{where}: threshold {threshold} outside the open interval (0, 5)")
        return None
    return AUCondition.intensity_above(au, threshold)


def _parse_rearm(raw: Any, where: str, out: _Collector) -> Rearm | None:
    if raw is None:
        return Rearm(RELEASE)
    if not isinstance(raw, dict) or "policy" not in raw:
        out.error(f"{where}: rearm must be an object with a 'policy'")
        return None
    policy = raw["policy"]
    if policy == RELEASE:
        if set(raw) - {"policy"}:
            out.error(f"{where}: release rearm takes no extra keys")
            return None
        return Rearm(RELEASE)
    if policy == REFRACTORY:
        frames = raw.get("frames", 0)
        if set(raw) - {"policy", "frames"} or not _is_int(frames) or frames < 0:
            out.error(f"{where}: refractory rearm needs integer 'frames' >= 0")
            return None
        return Rearm(REFRACTORY, frames)
    out.error(f"{where}: unknown rearm policy {policy!r}")
    return None


def _parse_action(raw: Any, where: str, out: _Collector) -> Action | None:
    if not isinstance(raw, dict) or len(raw) != 1:
        out.error(f"{where}: action must be a single-key object like {{\"tap\": \"1\"}}")
        return None
    kind, target = next(iter(raw.items()))
    if kind not in _ACTION_KINDS:
        out.error(f"{where}: unknown action kind {kind!r}")
        return None
    if not isinstance(target, str) or not target:
        out.error(f"{where}: action target must be a non-empty string")
        return None
    return Action(kind, target)


def _check_action_refs(
    action: Action,
    where: str,
    key_space: set[str],
    macro_ids: set[str],
    mode_ids: set[str],
    out: _Collector,
) -> None:
    if action.kind in (TAP, TOGGLE) and action.target not in key_space:
        out.error(f"{where}: key {action.target!r} is not in key_space")
    elif action.kind == MACRO and action.target not in macro_ids:
        out.error(f"{where}: references unknown macro {action.target!r}")
    elif action.kind == SWITCH_MODE and action.target not in mode_ids:
        out.error(f"{where}: references unknown mode {action.target!r}")


def parse_profile(document: str | dict) -> ParseResult:
    """Validate a profile document; returns the profile or every error found."""
    out = _Collector()
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            return ParseResult(None, [f"document is not valid JSON: {exc}"], [])
    else:
        doc = document
    if not isinstance(doc, dict):
        return ParseResult(None, ["document root must be an object"], [])

    unknown = set(doc) - _TOP_KEYS
    if unknown:
        out.error(f"unknown top-level key(s): {', '.join(sorted(unknown))}")

    name = doc.get("name")
    if not isinstance(name, str) or not name:
        out.error("'name' must be a non-empty string")
        name = ""

    key_space_raw = doc.get("key_space")
    key_space: list[str] = []
    if not isinstance(key_space_raw, list) or not key_space_raw:
        out.error("'key_space' must be a non-empty list of symbolic keys")
    else:
        for k in key_space_raw:
            if not isinstance(k, str) or not k:
                out.error(f"key_space entry {k!r} must be a non-empty string")
            elif k in key_space:
                out.error(f"duplicate key {k!r} in key_space")
            else:
                key_space.append(k)

    params = dict(DEFAULT_ENGINE_PARAMS)
    ep_raw = doc.get("engine_params", {})
    if not isinstance(ep_raw, dict):
        out.error("'engine_params' must be an object")
    else:
        unknown = set(ep_raw) - set(DEFAULT_ENGINE_PARAMS)
        if unknown:
            out.error(f"unknown engine_params key(s): {', '.join(sorted(unknown))}")
        for key in ("frame_threshold", "tap_hold_ms", "staleness_ms"):
            if key in ep_raw:
                if not _is_int(ep_raw[key]) or ep_raw[key] < (1 if key == "frame_threshold" else 0):
                    out.error(f"engine_params.{key} must be a non-negative integer"
                              + (" >= 1" if key == "frame_threshold" else ""))
                else:
                    params[key] = ep_raw[key]
        if "min_confidence" in ep_raw:
            mc = ep_raw["min_confidence"]
            if not _is_num(mc) or not (0.0 <= mc <= 1.0):
                out.error("engine_params.min_confidence must be in [0, 1]")
            else:
                params["min_confidence"] = float(mc)
    engine_params = EngineParams(**params)

    rules: list[ExpressionRule] = []
    rule_ids: set[str] = set()
    rules_raw = doc.get("rules")
    if not isinstance(rules_raw, list):
        out.error("'rules' must be a list")
        rules_raw = []
    for i, raw in enumerate(rules_raw):
        where = f"rules[{i}]"
        if not isinstance(raw, dict):
            out.error(f"{where}: must be an object")
            continue
        unknown = set(raw) - _RULE_KEYS
        if unknown:
            out.error(f"{where}: unknown key(s): {', '.join(sorted(unknown))}")
        rule_id = raw.get("rule_id")
        if not isinstance(rule_id, str) or not rule_id:
            out.error(f"{where}: 'rule_id' must be a non-empty string")
            continue
        where = f"rule {rule_id!r}"
        if rule_id in rule_ids:
            out.error(f"duplicate rule_id {rule_id!r}")
            continue
        rule_ids.add(rule_id)
        conds_raw = raw.get("conditions")
        if not isinstance(conds_raw, list) or not conds_raw:
            out.error(f"{where}: 'conditions' must be a non-empty list")
            continue
        conditions = [_parse_condition(c, where, out) for c in conds_raw]
        if any(c is None for c in conditions):
            continue
        if not (2 <= len(conditions) <= 3):
            out.warn(
                f"{where}: {len(conditions)} condition(s); combinations of 2-3 AUs "
                "are easiest to make and detect reliably"
            )
        frame_threshold = raw.get("frame_threshold", params["frame_threshold"])
        if not _is_int(frame_threshold) or frame_threshold < 1:
            out.error(f"{where}: frame_threshold must be an integer >= 1")
            continue
        min_confidence = raw.get("min_confidence", params["min_confidence"])
        if not _is_num(min_confidence) or not (0.0 <= min_confidence <= 1.0):
            out.error(f"{where}: min_confidence must be in [0, 1]")
            continue
        priority = raw.get("priority", 0)
        if not _is_int(priority):
            out.error(f"{where}: priority must be an integer")
            continue
        rearm = _parse_rearm(raw.get("rearm"), where, out)
        if rearm is None:
            continue
        display_name = raw.get("display_name", rule_id)
        if not isinstance(display_name, str) or not display_name:
            out.error(f"{where}: display_name must be a non-empty string")
            continue
        rules.append(
            ExpressionRule(
                rule_id=rule_id,
                conditions=tuple(conditions),  # type: ignore[arg-type]
                display_name=display_name,
                frame_threshold=frame_threshold,
                rearm=rearm,
                priority=priority,
                min_confidence=float(min_confidence),
            )
        )

    macros: list[MacroDefinition] = []
    macro_ids: set[str] = set()
    macros_raw = doc.get("macros", [])
    if not isinstance(macros_raw, list):
        out.error("'macros' must be a list")
        macros_raw = []
    for i, raw in enumerate(macros_raw):
        where = f"macros[{i}]"
        if not isinstance(raw, dict) or set(raw) - {"macro_id", "steps"}:
            out.error(f"{where}: must be an object with 'macro_id' and 'steps'")
            continue
        macro_id = raw.get("macro_id")
        if not isinstance(macro_id, str) or not macro_id:
            out.error(f"{where}: 'macro_id' must be a non-empty string")
            continue
        where = f"macro {macro_id!r}"
        if macro_id in macro_ids:
            out.error(f"duplicate macro_id {macro_id!r}")
            continue
        macro_ids.add(macro_id)
        steps_raw = raw.get("steps")
        if not isinstance(steps_raw, list) or not steps_raw:
            out.error(f"{where}: 'steps' must be a non-empty list")
            continue
        steps: list[MacroStep] = []
        bad = False
        for j, step in enumerate(steps_raw):
            if (
                not isinstance(step, dict)
                or set(step) - {"key", "down_ms", "gap_ms"}
                or not isinstance(step.get("key"), str)
                or not _is_int(step.get("down_ms"))
                or step["down_ms"] < 0
                or not _is_int(step.get("gap_ms", 0))
                or step.get("gap_ms", 0) < 0
            ):
                out.error(f"{where}: steps[{j}] must be {{key, down_ms>=0, gap_ms>=0}}")
                bad = True
                continue
            if step["key"] not in key_space:
                out.error(f"{where}: steps[{j}] key {step['key']!r} is not in key_space")
                bad = True
                continue
            steps.append(MacroStep(step["key"], step["down_ms"], step.get("gap_ms", 0)))
        if not bad:
            macros.append(MacroDefinition(macro_id, tuple(steps)))

    modes: dict[str, ModeConfig] = {}
    modes_raw = doc.get("modes")
    if not isinstance(modes_raw, dict) or not modes_raw:
        out.error("'modes' must be a non-empty object")
        modes_raw = {}
    mode_ids = set(modes_raw)
    key_space_set = set(key_space)
    for mode_id, raw in modes_raw.items():
        where = f"mode {mode_id!r}"
        if not isinstance(raw, dict) or set(raw) - {"bindings", "keywords"}:
            out.error(f"{where}: must be an object with 'bindings' and optional 'keywords'")
            continue
        bindings: dict[str, Action] = {}
        bindings_raw = raw.get("bindings", {})
        if not isinstance(bindings_raw, dict):
            out.error(f"{where}: 'bindings' must be an object")
            bindings_raw = {}
        for rule_id, action_raw in bindings_raw.items():
            bwhere = f"{where} binding for rule {rule_id!r}"
            if rule_id not in rule_ids:
                out.error(f"{bwhere}: references unknown rule {rule_id!r}")
                continue
            action = _parse_action(action_raw, bwhere, out)
            if action is None:
                continue
            _check_action_refs(action, bwhere, key_space_set, macro_ids, mode_ids, out)
            bindings[rule_id] = action
        keywords: list[KeywordBinding] = []
        phrases: set[str] = set()
        keywords_raw = raw.get("keywords", [])
        if not isinstance(keywords_raw, list):
            out.error(f"{where}: 'keywords' must be a list")
            keywords_raw = []
        for j, kw in enumerate(keywords_raw):
            kwhere = f"{where} keywords[{j}]"
            if not isinstance(kw, dict) or set(kw) != {"phrase", "action"}:
                out.error(f"{kwhere}: must be {{phrase, action}}")
                continue
            phrase = kw["phrase"]
            if not isinstance(phrase, str) or not phrase or phrase != phrase.lower() or " " in phrase:
                out.error(f"{kwhere}: phrase must be a single lowercase word")
                continue
            if phrase in phrases:
                out.error(f"{where}: duplicate keyword phrase {phrase!r}")
                continue
            action = _parse_action(kw["action"], kwhere, out)
            if action is None:
                continue
            _check_action_refs(action, kwhere, key_space_set, macro_ids, mode_ids, out)
            phrases.add(phrase)
            keywords.append(KeywordBinding(phrase, action))
        modes[mode_id] = ModeConfig(bindings=bindings, keywords=tuple(keywords))

    initial_mode = doc.get("initial_mode")
    if not isinstance(initial_mode, str) or initial_mode not in mode_ids:
        out.error(f"initial_mode {initial_mode!r} is not a defined mode")
        initial_mode = ""

    if out.errors:
        return ParseResult(None, out.errors, out.warnings)
    profile = Profile(
        name=name,
        key_space=tuple(key_space),
        rules=tuple(rules),
        modes=modes,
        initial_mode=initial_mode,
        macros=tuple(macros),
        engine_params=engine_params,
    )
    return ParseResult(profile, [], out.warnings)


# ---------------------------------------------------------------------------
# serialization

def _condition_doc(cond: AUCondition) -> dict:
    if cond.mode == PRESENCE:
        return {"au": cond.au_id, "presence": True}
    return {"au": cond.au_id, "above": round(cond.threshold, 2)}


def _rearm_doc(rearm: Rearm) -> dict:
    if rearm.policy == RELEASE:
        return {"policy": RELEASE}
    return {"policy": REFRACTORY, "frames": rearm.refractory_frames}


def _action_doc(action: Action) -> dict:
    return {action.kind: action.target}


def profile_document(profile: Profile) -> dict:
    """Plain-dict form of a profile, with every per-rule parameter explicit."""
    return {
        "name": profile.name,
        "key_space": list(profile.key_space),
        "engine_params": {
            "frame_threshold": profile.engine_params.frame_threshold,
            "min_confidence": profile.engine_params.min_confidence,
            "tap_hold_ms": profile.engine_params.tap_hold_ms,
            "staleness_ms": profile.engine_params.staleness_ms,
        },
        "rules": [
            {
                "rule_id": r.rule_id,
                "display_name": r.display_name,
                "conditions": [_condition_doc(c) for c in r.conditions],
                "frame_threshold": r.frame_threshold,
                "rearm": _rearm_doc(r.rearm),
                "priority": r.priority,
                "min_confidence": r.min_confidence,
            }
            for r in profile.rules
        ],
        "macros": [
            {
                "macro_id": m.macro_id,
                "steps": [
                    {"key": s.key, "down_ms": s.down_ms, "gap_ms": s.gap_ms} for s in m.steps
                ],
            }
            for m in profile.macros
        ],
        "modes": {
            mode_id: {
                "bindings": {rid: _action_doc(a) for rid, a in mode.bindings.items()},
                "keywords": [
                    {"phrase": kw.phrase, "action": _action_doc(kw.action)} for kw in mode.keywords
                ],
            }
            for mode_id, mode in profile.modes.items()
        },
        "initial_mode": profile.initial_mode,
    }


def serialize_profile(profile: Profile) -> str:
    """Canonical text form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(profile_document(profile), sort_keys=True, indent=2) + "\n"


def load_profile_file(path) -> ParseResult:
    with open(path, encoding="utf-8") as fh:
        return parse_profile(fh.read())


# ---------------------------------------------------------------------------
# builtin profiles

def _table1_rules() -> tuple[ExpressionRule, ...]:
    c = AUCondition
    return (
        ExpressionRule(
            "happiness",
            (c.intensity_above(6, 2.0), c.intensity_above(12, 2.0)),
            display_name="Happiness",
        ),
        ExpressionRule(
            "sadness",
            (c.presence(1), c.presence(4), c.presence(15)),
            display_name="Sadness",
        ),
        ExpressionRule(
            "disgust",
            (c.intensity_above(9, 1.4), c.intensity_above(10, 2.0)),
            display_name="Disgust",
        ),
        ExpressionRule(
            "wide-eyes",
            (c.intensity_above(2, 0.5), c.intensity_above(5, 1.5)),
            display_name="Wide Eyes",
        ),
        # Rows 5 and 6 are unnamed in the source material; these labels are
        # inferred from the published expression photos.
        ExpressionRule(
            "pucker",
            (c.intensity_above(7, 1.4), c.intensity_above(23, 1.0)),
            display_name="Pucker",
        ),
        ExpressionRule(
            "jaw-drop",
            (c.presence(4), c.presence(25), c.presence(26)),
            display_name="Jaw Drop",
        ),
    )


_TABLE1_ORDER = ("happiness", "sadness", "disgust", "wide-eyes", "pucker", "jaw-drop")


def builtin_profiles() -> dict[str, Profile]:
    """The shipped configurations: the default six-expression map plus the
    three game profiles."""
    rules = _table1_rules()
    keys6 = tuple(str(i) for i in range(1, 7))

    def taps() -> dict[str, Action]:
        return {rid: Action(TAP, str(i + 1)) for i, rid in enumerate(_TABLE1_ORDER)}

    table1 = Profile(
        name="table1-default",
        key_space=keys6,
        rules=rules,
        modes={"default": ModeConfig(bindings=taps())},
        initial_mode="default",
    )

    walking = Profile(
        name="walking-adventure",
        key_space=keys6,
        rules=rules,
        modes={
            "default": ModeConfig(
                bindings=taps(),
                keywords=(
                    KeywordBinding("yes", Action(TAP, "5")),
                    KeywordBinding("no", Action(TAP, "6")),
                ),
            )
        },
        initial_mode="default",
    )

    fps = Profile(
        name="fps",
        key_space=keys6,
        rules=rules,
        modes={
            "default": ModeConfig(
                bindings={
                    "happiness": Action(TOGGLE, "1"),  # start/stop walking forward
                    "sadness": Action(TAP, "2"),  # aim and shoot
                    "disgust": Action(TOGGLE, "3"),  # start/stop turning left
                    "wide-eyes": Action(TOGGLE, "4"),  # start/stop turning right
                    "pucker": Action(TAP, "5"),  # jump
                    "jaw-drop": Action(TAP, "6"),  # pause
                },
                keywords=(KeywordBinding("pause", Action(TAP, "6")),),
            )
        },
        initial_mode="default",
    )

    car = Profile(
        name="car-racing",
        key_space=tuple(str(i) for i in range(1, 5)),
        rules=rules[:4],
        modes={
            "default": ModeConfig(
                bindings={
                    "happiness": Action(TOGGLE, "1"),  # start/stop driving forward
                    "sadness": Action(TOGGLE, "2"),  # start/stop driving backward
                    "disgust": Action(TOGGLE, "3"),  # start/stop turning left
                    "wide-eyes": Action(TOGGLE, "4"),  # start/stop turning right
                },
            )
        },
        initial_mode="default",
    )

    return {p.name: p for p in (table1, walking, fps, car)}
