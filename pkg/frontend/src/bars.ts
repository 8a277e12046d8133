// Pure view-models for the live panel. No rule evaluation happens here:
// matched/fire indications come from server telemetry; this only lays out
// what the server reported.

import { AU_IDS, AU_NAMES, INTENSITY_MAX } from "./aus.js";
import type { FramePayload, ProfileDoc, RuleStatus, StatusDoc } from "./types.js";

export interface ThresholdMarker {
  ruleId: string;
  threshold: number;
  leftPct: number;
}

export interface BarRow {
  au: number;
  name: string;
  intensity: number;
  widthPct: number;
  present: boolean;
  overThreshold: boolean;
  markers: ThresholdMarker[];
}

export function thresholdMarkers(profile: ProfileDoc): Map<number, ThresholdMarker[]> {
  const markers = new Map<number, ThresholdMarker[]>();
  for (const rule of profile.rules) {
    for (const condition of rule.conditions) {
      if (condition.above === undefined) continue;
      const list = markers.get(condition.au) ?? [];
      list.push({
        ruleId: rule.rule_id,
        threshold: condition.above,
        leftPct: (condition.above / INTENSITY_MAX) * 100,
      });
      markers.set(condition.au, list);
    }
  }
  return markers;
}

export function barModel(frame: FramePayload, profile: ProfileDoc): BarRow[] {
  const markers = thresholdMarkers(profile);
  return AU_IDS.map((au) => {
    const intensity = frame.intensity[String(au)] ?? 0;
    const auMarkers = markers.get(au) ?? [];
    return {
      au,
      name: AU_NAMES[au],
      intensity,
      widthPct: Math.max(0, Math.min(100, (intensity / INTENSITY_MAX) * 100)),
      present: frame.presence[String(au)] ?? false,
      overThreshold: auMarkers.some((m) => intensity > m.threshold),
      markers: auMarkers,
    };
  });
}

export interface RuleRow {
  ruleId: string;
  displayName: string;
  conditionSummary: string;
  matched: boolean;
  consecutiveCount: number;
  frameThreshold: number;
  totalFires: number;
  bound: boolean;
}

export function ruleRows(profile: ProfileDoc, status: StatusDoc | null): RuleRow[] {
  const activeMode = status ? profile.modes[status.active_mode] : undefined;
  return profile.rules.map((rule) => {
    const telemetry: RuleStatus | undefined = status?.rules[rule.rule_id];
    const summary = rule.conditions
      .map((c) => (c.presence ? `AU${c.au}` : `AU${c.au}>${c.above}`))
      .join(" + ");
    return {
      ruleId: rule.rule_id,
      displayName: rule.display_name,
      conditionSummary: summary,
      matched: telemetry?.matched ?? false,
      consecutiveCount: telemetry?.consecutive_count ?? 0,
      frameThreshold: rule.frame_threshold,
      totalFires: telemetry?.total_fires ?? 0,
      bound: activeMode ? rule.rule_id in activeMode.bindings : false,
    };
  });
}

export type ConfidenceState = "ok" | "warn";

export function confidenceState(confidence: number, minConfidence: number): ConfidenceState {
  return confidence >= minConfidence ? "ok" : "warn";
}

/** Smallest min_confidence across rules: below it every rule is gated off. */
export function minRuleConfidence(profile: ProfileDoc): number {
  if (!profile.rules.length) return profile.engine_params.min_confidence;
  return Math.min(...profile.rules.map((r) => r.min_confidence));
}
