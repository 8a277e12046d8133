"""Synthetic AU streams, the brute-force debounce oracle, metrics, sweeps.

This is the offline harness that stands in for a human tuning thresholds in
front of a camera: scripted expression episodes with optional Gaussian
noise and confidence dips, a reference (non-incremental) implementation of
the debounce semantics to check the engine against, and exhaustive
threshold/frame-count sweeps reported as plain tables.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .aus import AU_IDS, INTENSITY_MAX, INTENSITY_MIN
from .frames import AUFrame
from .rules import INTENSITY_ABOVE, RELEASE, ExpressionRule, Rearm, RuleEngine


@dataclass(frozen=True)
class Episode:
    """A scripted expression hold: target AUs at a level for a frame span."""

    start_frame: int
    duration_frames: int
    intensity_level: float
    rule_id: str | None = None  # resolved against the profile's rules
    au_targets: tuple[int, ...] = ()  # explicit targets when no rule template

    def __post_init__(self):
        if self.start_frame < 0 or self.duration_frames < 1:
            raise ValueError("episode must start at frame >= 0 and last >= 1 frame")
        if not (INTENSITY_MIN <= self.intensity_level <= INTENSITY_MAX):
            raise ValueError("intensity_level must be within [0, 5]")
        if self.rule_id is None and not self.au_targets:
            raise ValueError("episode needs a rule template or explicit AU targets")

    @property
    def end_frame(self) -> int:
        return self.start_frame + self.duration_frames

    def contains(self, frame_index: int) -> bool:
        return self.start_frame <= frame_index < self.end_frame


@dataclass(frozen=True)
class ConfidenceDip:
    start_frame: int
    end_frame: int
    value: float


@dataclass(frozen=True)
class EpisodeScript:
    total_frames: int
    episodes: tuple[Episode, ...]
    fps: float = 30.0
    noise_sigma: float = 0.0
    confidence: float = 0.99
    confidence_dips: tuple[ConfidenceDip, ...] = ()

    def __post_init__(self):
        if self.total_frames < 1 or self.fps <= 0:
            raise ValueError("total_frames must be >= 1 and fps > 0")
        for ep in self.episodes:
            if ep.end_frame > self.total_frames:
                raise ValueError(
                    f"episode [{ep.start_frame}, {ep.end_frame}) exceeds total_frames"
                )


def _episode_targets(episode: Episode, rules: Mapping[str, ExpressionRule]) -> tuple[int, ...]:
    if episode.rule_id is not None:
        rule = rules.get(episode.rule_id)
        if rule is None:
            raise KeyError(f"script references unknown rule {episode.rule_id!r}")
        return tuple(c.au_id for c in rule.conditions)
    return episode.au_targets


def generate_stream(
    script: EpisodeScript,
    rules: Mapping[str, ExpressionRule] | None = None,
    seed: int = 0,
) -> list[AUFrame]:
    """Deterministic frame sequence for a script.

    Inside an episode the targeted AUs hold ``intensity_level`` (pre-noise)
    with presence set; everywhere else they are 0/absent. Gaussian noise is
    added to every intensity and clamped back into [0, 5], which truncates
    the distribution at the rails.
    """
    rng = random.Random(seed)
    rules = rules or {}
    targets_by_episode = [(ep, _episode_targets(ep, rules)) for ep in script.episodes]
    frame_period_ms = 1000.0 / script.fps
    frames: list[AUFrame] = []
    for i in range(script.total_frames):
        base = {au: 0.0 for au in AU_IDS}
        presence = {au: False for au in AU_IDS}
        for episode, targets in targets_by_episode:
            if episode.contains(i):
                for au in targets:
                    base[au] = episode.intensity_level
                    presence[au] = episode.intensity_level > 0
        confidence = script.confidence
        for dip in script.confidence_dips:
            if dip.start_frame <= i < dip.end_frame:
                confidence = dip.value
        intensity = {}
        for au in AU_IDS:
            value = base[au]
            if script.noise_sigma > 0:
                value += rng.gauss(0.0, script.noise_sigma)
                if value < INTENSITY_MIN:
                    value = INTENSITY_MIN
                elif value > INTENSITY_MAX:
                    value = INTENSITY_MAX
            intensity[au] = value
        frames.append(
            AUFrame(
                frame_index=i,
                timestamp_ms=round(i * frame_period_ms),
                confidence=confidence,
                presence=presence,
                intensity=intensity,
            )
        )
    return frames


# ---------------------------------------------------------------------------
# script files (same JSON conventions as profile documents)

def parse_script(document: str | dict) -> EpisodeScript:
    doc = json.loads(document) if isinstance(document, str) else document
    episodes = []
    for raw in doc.get("episodes", []):
        episodes.append(
            Episode(
                start_frame=raw["start"],
                duration_frames=raw["duration"],
                intensity_level=raw.get("level", 2.5),
                rule_id=raw.get("rule"),
                au_targets=tuple(int(a) for a in raw.get("aus", [])),
            )
        )
    dips = tuple(
        ConfidenceDip(d["start"], d["end"], d["value"]) for d in doc.get("confidence_dips", [])
    )
    return EpisodeScript(
        total_frames=doc["total_frames"],
        episodes=tuple(episodes),
        fps=doc.get("fps", 30.0),
        noise_sigma=doc.get("noise_sigma", 0.0),
        confidence=doc.get("confidence", 0.99),
        confidence_dips=dips,
    )


def script_document(script: EpisodeScript) -> dict:
    episodes = []
    for ep in script.episodes:
        raw: dict = {"start": ep.start_frame, "duration": ep.duration_frames, "level": ep.intensity_level}
        if ep.rule_id is not None:
            raw["rule"] = ep.rule_id
        if ep.au_targets:
            raw["aus"] = list(ep.au_targets)
        episodes.append(raw)
    doc = {
        "total_frames": script.total_frames,
        "fps": script.fps,
        "noise_sigma": script.noise_sigma,
        "confidence": script.confidence,
        "episodes": episodes,
    }
    if script.confidence_dips:
        doc["confidence_dips"] = [
            {"start": d.start_frame, "end": d.end_frame, "value": d.value}
            for d in script.confidence_dips
        ]
    return doc


def episode_level_for_rule(rule: ExpressionRule, margin: float = 0.5) -> float:
    """A level that clears every intensity threshold of the rule."""
    thresholds = [c.threshold for c in rule.conditions if c.mode == INTENSITY_ABOVE]
    if not thresholds:
        return 2.5
    return min(max(thresholds) + margin, INTENSITY_MAX)


def sequential_episode_script(
    rules: Sequence[ExpressionRule],
    frames_per_episode: int = 8,
    gap_frames: int = 12,
    confidence: float = 0.99,
    fps: float = 30.0,
    lead_in: int = 10,
    level_margin: float = 0.5,
) -> EpisodeScript:
    """One episode per rule, in order, separated by neutral gaps."""
    episodes = []
    cursor = lead_in
    for rule in rules:
        episodes.append(
            Episode(
                start_frame=cursor,
                duration_frames=frames_per_episode,
                intensity_level=episode_level_for_rule(rule, level_margin),
                rule_id=rule.rule_id,
            )
        )
        cursor += frames_per_episode + gap_frames
    return EpisodeScript(
        total_frames=cursor + lead_in,
        episodes=tuple(episodes),
        fps=fps,
        confidence=confidence,
    )


# ---------------------------------------------------------------------------
# brute-force oracle

def oracle_fires(matches: Sequence[bool], frame_threshold: int, rearm: Rearm) -> list[int]:
    """Reference fire indices for one rule's match sequence (0-based).

    Deliberately non-incremental: release-required fires are derived from
    maximal runs; refractory fires rescan the run backwards from each frame.
    This must stay independent of DebounceState.step.
    """
    if frame_threshold < 1:
        raise ValueError("frame_threshold must be >= 1")
    n = len(matches)
    fires: list[int] = []
    if rearm.policy == RELEASE:
        i = 0
        while i < n:
            if not matches[i]:
                i += 1
                continue
            run_start = i
            while i < n and matches[i]:
                i += 1
            if i - run_start >= frame_threshold:
                fires.append(run_start + frame_threshold - 1)
        return fires
    # refractory: a fire consumes its run prefix; the next fire needs
    # frame_threshold fresh matches and at least n_frames elapsed.
    last_fire = None
    for i in range(n):
        if not matches[i]:
            continue
        barrier = -1 if last_fire is None else last_fire
        start = i
        while start - 1 > barrier and matches[start - 1]:
            start -= 1
        if i - start + 1 < frame_threshold:
            continue
        if last_fire is not None and i - last_fire < rearm.refractory_frames:
            continue
        fires.append(i)
        last_fire = i
    return fires


@dataclass(frozen=True)
class OracleRule:
    rule_id: str
    frame_threshold: int
    rearm: Rearm
    priority: int = 0


def oracle_triggers(
    match_seqs: Mapping[str, Sequence[bool]],
    rules: Mapping[str, OracleRule] | Sequence[OracleRule],
    active_rule_ids: Iterable[str] | None = None,
) -> list[tuple[int, str]]:
    """Reference trigger sequence including arbitration and suppression resets.

    Simulated frame by frame with backward run scans; independent of the
    incremental engine. Suppressed rules (arbitration losers and fires from
    inactive rules) restart from zero and armed.
    """
    if not isinstance(rules, Mapping):
        rules = {r.rule_id: r for r in rules}
    active = set(rules) if active_rule_ids is None else set(active_rule_ids)
    n = max((len(s) for s in match_seqs.values()), default=0)
    exclude_until: dict[str, int] = {rid: -1 for rid in rules}  # frames <= this are barred
    release_fire: dict[str, int | None] = {rid: None for rid in rules}
    refr_until: dict[str, int] = {rid: 0 for rid in rules}
    triggers: list[tuple[int, str]] = []
    for i in range(n):
        candidates: list[str] = []
        for rid, meta in rules.items():
            seq = match_seqs[rid]
            if i >= len(seq) or not seq[i]:
                continue
            start = i
            floor = exclude_until[rid]
            while start - 1 > floor and start - 1 >= 0 and seq[start - 1]:
                start -= 1
            if i - start + 1 < meta.frame_threshold:
                continue
            if meta.rearm.policy == RELEASE:
                last = release_fire[rid]
                if last is not None and start <= last:
                    continue  # expression never released since the last fire
            else:
                if i < refr_until[rid]:
                    continue
            candidates.append(rid)
        winners = [rid for rid in candidates if rid in active]
        winner = None
        if winners:
            winner = min(winners, key=lambda rid: (-rules[rid].priority, rid))
            triggers.append((i, winner))
        for rid in candidates:
            if rid == winner:
                meta = rules[rid]
                if meta.rearm.policy == RELEASE:
                    release_fire[rid] = i
                else:
                    exclude_until[rid] = i
                    refr_until[rid] = i + meta.rearm.refractory_frames
            else:
                exclude_until[rid] = i
                release_fire[rid] = None
                refr_until[rid] = 0
    return triggers


# ---------------------------------------------------------------------------
# metrics

@dataclass
class RunMetrics:
    episode_latencies: list[int | None] = field(default_factory=list)  # None = miss
    false_positive_count: int = 0
    miss_count: int = 0

    @property
    def mean_latency(self) -> float | None:
        hits = [lat for lat in self.episode_latencies if lat is not None]
        if not hits:
            return None
        return sum(hits) / len(hits)


def measure(
    triggers: Sequence[tuple[int, str]],
    script: EpisodeScript,
    match_rule_ids: bool = True,
) -> RunMetrics:
    """Attribute triggers to script episodes.

    A trigger belongs to an episode when it lands inside the episode's frame
    window and (when the episode was generated from a rule template and
    ``match_rule_ids``) carries that rule's id. Unattributed triggers are
    false positives; episodes with no trigger are misses.
    """
    metrics = RunMetrics()
    claimed = [False] * len(triggers)
    for episode in script.episodes:
        first: int | None = None
        for t, (frame, rule_id) in enumerate(triggers):
            if not episode.contains(frame):
                continue
            if match_rule_ids and episode.rule_id is not None and rule_id != episode.rule_id:
                continue
            claimed[t] = True
            if first is None:
                first = frame
        if first is None:
            metrics.episode_latencies.append(None)
            metrics.miss_count += 1
        else:
            metrics.episode_latencies.append(first - episode.start_frame)
    metrics.false_positive_count = claimed.count(False)
    return metrics


def run_rules(
    frames: Iterable[AUFrame], rules: Sequence[ExpressionRule]
) -> list[tuple[int, str]]:
    """Offline engine run over the rules; returns (frame_index, rule_id) triggers."""
    engine = RuleEngine(rules)
    triggers: list[tuple[int, str]] = []
    for frame in frames:
        step = engine.step(frame)
        for rule_id in step.triggers:
            triggers.append((frame.frame_index, rule_id))
    return triggers


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    frame_threshold: int
    false_positives: int
    misses: int
    mean_latency: float | None


def sweep(
    frames: Sequence[AUFrame],
    script: EpisodeScript,
    au_ids: Sequence[int],
    thresholds: Sequence[float],
    frame_thresholds: Sequence[int],
    min_confidence: float = 0.75,
) -> list[SweepRow]:
    """Exhaustive offline grid over (threshold, frame_threshold).

    Each grid point replays the recorded frames through a single conjunction
    rule over ``au_ids`` and scores it against the script's episode labels.
    All rows are reported; nothing is auto-picked.
    """
    if not thresholds or not frame_thresholds:
        raise ValueError("threshold and frame-threshold grids must be non-empty")
    from .rules import AUCondition

    rows: list[SweepRow] = []
    for threshold in thresholds:
        for k in frame_thresholds:
            rule = ExpressionRule(
                rule_id="sweep",
                conditions=tuple(AUCondition.intensity_above(au, threshold) for au in au_ids),
                frame_threshold=k,
                min_confidence=min_confidence,
            )
            triggers = run_rules(frames, [rule])
            metrics = measure(triggers, script, match_rule_ids=False)
            rows.append(
                SweepRow(
                    threshold=threshold,
                    frame_threshold=k,
                    false_positives=metrics.false_positive_count,
                    misses=metrics.miss_count,
                    mean_latency=metrics.mean_latency,
                )
            )
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    lines = ["threshold,frame_threshold,false_positives,misses,mean_latency_frames"]
    for row in rows:
        latency = "" if row.mean_latency is None else f"{row.mean_latency:.3f}"
        lines.append(
            f"{row.threshold},{row.frame_threshold},{row.false_positives},{row.misses},{latency}"
        )
    return "\n".join(lines) + "\n"
