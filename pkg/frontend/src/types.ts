// Document and wire payload shapes shared across the panel.

export type ActionDoc =
  | { tap: string }
  | { toggle: string }
  | { macro: string }
  | { switch_mode: string };

export interface ConditionDoc {
  au: number;
  presence?: true;
  above?: number;
}

export interface RearmDoc {
  policy: "release" | "refractory";
  frames?: number;
}

export interface RuleDoc {
  rule_id: string;
  display_name: string;
  conditions: ConditionDoc[];
  frame_threshold: number;
  rearm: RearmDoc;
  priority: number;
  min_confidence: number;
}

export interface MacroStepDoc {
  key: string;
  down_ms: number;
  gap_ms: number;
}

export interface MacroDoc {
  macro_id: string;
  steps: MacroStepDoc[];
}

export interface KeywordDoc {
  phrase: string;
  action: ActionDoc;
}

export interface ModeDoc {
  bindings: Record<string, ActionDoc>;
  keywords: KeywordDoc[];
}

export interface EngineParamsDoc {
  frame_threshold: number;
  min_confidence: number;
  tap_hold_ms: number;
  staleness_ms: number;
}

export interface ProfileDoc {
  name: string;
  key_space: string[];
  engine_params: EngineParamsDoc;
  rules: RuleDoc[];
  macros: MacroDoc[];
  modes: Record<string, ModeDoc>;
  initial_mode: string;
}

export interface RuleStatus {
  matched: boolean;
  consecutive_count: number;
  total_fires: number;
}

export interface StatusDoc {
  active_profile: string;
  active_mode: string;
  fps: number | null;
  frame_index: number;
  rules: Record<string, RuleStatus>;
  held_keys: string[];
  last_errors: string[];
  version: number;
  recording: string | null;
}

export interface FramePayload {
  frame_index: number;
  timestamp_ms: number;
  confidence: number;
  intensity: Record<string, number>;
  presence: Record<string, boolean>;
}

export interface TriggerPayload {
  frame_index: number;
  rule_id: string;
  timestamp_ms: number;
}

export interface KeyEventPayload {
  timestamp_ms: number;
  key: string;
  edge: "down" | "up";
  source: "face" | "speech" | "macro";
}

export type Channel = "frames" | "triggers" | "keyevents";

export interface ValidationResult {
  ok: boolean;
  errors: string[];
  warnings: string[];
}

export function actionKind(action: ActionDoc): "tap" | "toggle" | "macro" | "switch_mode" {
  return Object.keys(action)[0] as "tap" | "toggle" | "macro" | "switch_mode";
}

export function actionTarget(action: ActionDoc): string {
  return Object.values(action)[0] as string;
}
