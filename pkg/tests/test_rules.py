"""Rule evaluation, debouncing, and arbitration."""

from __future__ import annotations

import random

import pytest

from facekey.profiles import builtin_profiles
from facekey.rules import (
    AUCondition,
    DebounceState,
    ExpressionRule,
    Rearm,
    RuleEngine,
    arbitrate,
    debounce_step,
    eval_condition,
    eval_rule,
    refractory,
)
from facekey.simcal import oracle_fires

from conftest import frames_for_rule, make_frame

HAPPINESS = ExpressionRule(
    "happiness",
    (AUCondition.intensity_above(6, 2.0), AUCondition.intensity_above(12, 2.0)),
)
DISGUST = ExpressionRule(
    "disgust",
    (AUCondition.intensity_above(9, 1.4), AUCondition.intensity_above(10, 2.0)),
)
SADNESS = ExpressionRule(
    "sadness",
    (AUCondition.presence(1), AUCondition.presence(4), AUCondition.presence(15)),
)


# -- conditions ------------------------------------------------------------

def test_intensity_above_true_when_strictly_greater():
    cond = AUCondition.intensity_above(6, 2.0)
    assert eval_condition(cond, make_frame(intensity={6: 2.5})) is True


def test_intensity_exactly_at_threshold_is_no_match():
    cond = AUCondition.intensity_above(6, 2.0)
    assert eval_condition(cond, make_frame(intensity={6: 2.0})) is False


def test_presence_condition_reads_presence_flag():
    cond = AUCondition.presence(15)
    assert eval_condition(cond, make_frame(presence={15: True})) is True
    assert eval_condition(cond, make_frame(presence={15: False})) is False


def test_condition_validation():
    with pytest.raises(ValueError):
        AUCondition.intensity_above(6, 0.0)
    with pytest.raises(ValueError):
        AUCondition.intensity_above(6, 5.0)
    with pytest.raises(ValueError):
        AUCondition.intensity_above(3, 2.0)  # AU3 does not exist


# -- rule conjunction -------------------------------------------------------

def test_happiness_rule_matches_when_both_conditions_hold():
    frame = make_frame(confidence=0.9, intensity={6: 2.5, 12: 2.4})
    assert eval_rule(HAPPINESS, frame) is True


def test_low_confidence_frame_never_matches():
    frame = make_frame(confidence=0.3, intensity={6: 2.5, 12: 2.4})
    assert eval_rule(HAPPINESS, frame) is False


def test_one_failing_conjunct_fails_the_rule():
    frame = make_frame(intensity={9: 1.5, 10: 1.9})
    assert eval_rule(DISGUST, frame) is False


def test_strictness_property_equality_never_matches():
    rng = random.Random(41)
    for _ in range(1000):
        n = rng.randint(1, 3)
        aus = rng.sample([1, 2, 4, 5, 6, 7, 9, 10, 12], n)
        conds = tuple(AUCondition.intensity_above(au, round(rng.uniform(0.1, 4.9), 2)) for au in aus)
        rule = ExpressionRule("r", conds, min_confidence=0.0)
        # every condition exactly at its threshold
        frame = make_frame(intensity={c.au_id: c.threshold for c in conds})
        assert eval_rule(rule, frame) is False
        # any single condition degraded to equality breaks an otherwise-matching frame
        matching = {c.au_id: min(c.threshold + 0.2, 5.0) for c in conds}
        victim = rng.choice(conds)
        degraded = dict(matching)
        degraded[victim.au_id] = victim.threshold
        assert eval_rule(rule, make_frame(intensity=degraded)) is False


def test_monotonicity_property_pointwise_increase_preserves_match():
    rng = random.Random(42)
    for _ in range(1000):
        n = rng.randint(1, 3)
        aus = rng.sample([1, 2, 4, 5, 6, 7, 9, 10, 12, 23, 25], n)
        conds = tuple(AUCondition.intensity_above(au, round(rng.uniform(0.1, 4.0), 2)) for au in aus)
        rule = ExpressionRule("r", conds, min_confidence=0.5)
        base = {au: rng.uniform(0, 5) for au in aus}
        frame = make_frame(confidence=0.9, intensity=base)
        if not eval_rule(rule, frame):
            continue
        bumped = {au: min(v + rng.uniform(0, 5 - v), 5.0) for au, v in base.items()}
        frame_up = make_frame(confidence=0.9, intensity=bumped)
        assert eval_rule(rule, frame_up) is True


# -- debouncing ---------------------------------------------------------------

def _fold(matches, rule):
    state = DebounceState()
    fires = []
    for i, m in enumerate(matches):
        state, fired = debounce_step(state, m, rule)
        assert state.consecutive_count <= rule.frame_threshold
        if fired:
            fires.append(i)
    return fires


def test_five_consecutive_matches_fire_on_fifth_frame():
    assert _fold([True] * 5, HAPPINESS) == [4]


def test_broken_run_resets_the_count():
    matches = [True, True, True, True, False, True, True, True, True, True]
    assert _fold(matches, HAPPINESS) == [9]


def test_release_required_fires_once_while_held():
    assert _fold([True] * 20, HAPPINESS) == [4]


def test_refractory_zero_refires_every_threshold_frames():
    rule = ExpressionRule("r", HAPPINESS.conditions, rearm=refractory(0))
    assert _fold([True] * 20, rule) == [4, 9, 14, 19]


def test_release_rearms_after_gap():
    matches = [True] * 6 + [False] + [True] * 5
    assert _fold(matches, HAPPINESS) == [4, 11]


def test_refractory_waits_out_the_window():
    rule = ExpressionRule("r", HAPPINESS.conditions, frame_threshold=2, rearm=refractory(5))
    # fires at 1; needs 5 frames between fires even though count rebuilds sooner
    assert _fold([True] * 12, rule) == [1, 6, 11]


def test_debounce_step_is_pure():
    state = DebounceState()
    new_state, fired = debounce_step(state, True, HAPPINESS)
    assert state == DebounceState()
    assert new_state.consecutive_count == 1
    assert fired is False


@pytest.mark.parametrize("k", [1, 3, 5, 8])
@pytest.mark.parametrize("policy", ["release", "refractory"])
def test_debounce_matches_oracle_on_random_sequences(k, policy):
    rng = random.Random(1000 + k)
    for trial in range(500):
        matches = [rng.random() < 0.6 for _ in range(200)]
        rearm = Rearm("release") if policy == "release" else Rearm("refractory", rng.choice([0, 1, 3, 8]))
        rule = ExpressionRule("r", HAPPINESS.conditions, frame_threshold=k, rearm=rearm)
        assert _fold(matches, rule) == oracle_fires(matches, k, rearm), (
            f"trial {trial}: K={k} rearm={rearm}"
        )


# -- arbitration -----------------------------------------------------------------

RULES = {r.rule_id: r for r in builtin_profiles()["table1-default"].rules}


def test_arbitrate_singleton():
    assert arbitrate({"happiness"}, RULES) == "happiness"


def test_arbitrate_priority_wins():
    rules = {
        "happiness": ExpressionRule("happiness", HAPPINESS.conditions, priority=1),
        "disgust": ExpressionRule("disgust", DISGUST.conditions, priority=5),
    }
    assert arbitrate({"happiness", "disgust"}, rules) == "disgust"


def test_arbitrate_tie_breaks_lexicographically():
    assert arbitrate({"happiness", "disgust"}, RULES) == "disgust"


def test_arbitrate_empty():
    assert arbitrate(set(), RULES) is None


# -- engine step -----------------------------------------------------------------

def test_engine_fires_happiness_once_over_eight_matching_frames():
    engine = RuleEngine(list(RULES.values()))
    triggers = []
    for frame in frames_for_rule(RULES["happiness"], [True] * 8):
        triggers.extend((frame.frame_index, rid) for rid in engine.step(frame).triggers)
    assert triggers == [(4, "happiness")]


def test_neutral_stream_never_triggers():
    engine = RuleEngine(list(RULES.values()))
    for i in range(50):
        assert engine.step(make_frame(i)).triggers == []


def test_at_most_one_trigger_per_frame_and_loser_resets():
    a = ExpressionRule("aaa", (AUCondition.intensity_above(6, 1.0),), frame_threshold=3)
    b = ExpressionRule("bbb", (AUCondition.intensity_above(6, 2.0),), frame_threshold=3, priority=2)
    engine = RuleEngine([a, b])
    triggers = []
    for i in range(9):
        frame = make_frame(i, intensity={6: 3.0})
        step = engine.step(frame)
        assert len(step.triggers) <= 1
        triggers.extend((i, rid) for rid in step.triggers)
    # both reach 3 at frame 2; b wins on priority and a resets, then a rebuilds
    # and wins at frame 5 -- after which both are disarmed until release
    assert triggers == [(2, "bbb"), (5, "aaa")]


def test_suppressed_rule_counter_resets_in_telemetry():
    a = ExpressionRule("aaa", (AUCondition.intensity_above(6, 1.0),), frame_threshold=3)
    b = ExpressionRule("bbb", (AUCondition.intensity_above(6, 2.0),), frame_threshold=3, priority=2)
    engine = RuleEngine([a, b])
    for i in range(3):
        step = engine.step(make_frame(i, intensity={6: 3.0}))
    assert step.triggers == ["bbb"]
    assert step.telemetry["aaa"] == (True, 0)  # reset after losing


def test_inactive_rule_never_triggers():
    engine = RuleEngine(list(RULES.values()), active_rule_ids={"disgust"})
    triggers = []
    for frame in frames_for_rule(RULES["happiness"], [True] * 12):
        triggers.extend(engine.step(frame).triggers)
    assert triggers == []
    assert engine.total_fires["happiness"] == 0


def test_engine_step_deterministic():
    rng = random.Random(8)
    frames = []
    for i in range(300):
        frames.append(
            make_frame(
                i,
                confidence=rng.choice([0.99, 0.99, 0.5]),
                intensity={6: rng.uniform(0, 5), 12: rng.uniform(0, 5), 9: rng.uniform(0, 5), 10: rng.uniform(0, 5)},
                presence={1: rng.random() < 0.4, 4: rng.random() < 0.4, 15: rng.random() < 0.4},
            )
        )

    def run():
        engine = RuleEngine(list(RULES.values()))
        out = []
        for frame in frames:
            out.extend((frame.frame_index, rid) for rid in engine.step(frame).triggers)
        return out

    assert run() == run()


def test_duplicate_rule_ids_rejected():
    with pytest.raises(ValueError):
        RuleEngine([HAPPINESS, ExpressionRule("happiness", DISGUST.conditions)])


def test_telemetry_snapshot_shape():
    engine = RuleEngine([HAPPINESS])
    step = engine.step(make_frame(0, intensity={6: 2.5, 12: 2.5}))
    assert step.telemetry == {"happiness": (True, 1)}
