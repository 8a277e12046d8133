// Client-side profile validation mirroring the engine's parser rule for
// rule, so a draft is never submitted that the server would reject. The
// shared golden corpus (testdata/golden_profiles) pins both sides to the
// same verdicts.

import { AU_ID_SET, BLINK_AU, UNRELIABLE_CONDITION_AUS } from "./aus.js";
import type { ValidationResult } from "./types.js";

const TOP_KEYS = new Set([
  "name", "key_space", "engine_params", "rules", "macros", "modes", "initial_mode",
]);
const RULE_KEYS = new Set([
  "rule_id", "display_name", "conditions", "frame_threshold", "rearm", "priority", "min_confidence",
]);
const ACTION_KINDS = new Set(["tap", "toggle", "macro", "switch_mode"]);

const isObject = (v: unknown): v is Record<string, unknown> =>
  typeof v === "object" && v !== null && !Array.isArray(v);
const isInt = (v: unknown): v is number => Number.isInteger(v);
const isNum = (v: unknown): v is number => typeof v === "number" && Number.isFinite(v);
const isStr = (v: unknown): v is string => typeof v === "string" && v.length > 0;

class Collector {
  errors: string[] = [];
  warnings: string[] = [];
  error(msg: string) {
    this.errors.push(msg);
  }
  warn(msg: string) {
    this.warnings.push(msg);
  }
}

function unknownKeys(raw: Record<string, unknown>, allowed: Set<string>): string[] {
  return Object.keys(raw).filter((k) => !allowed.has(k)).sort();
}

function checkCondition(raw: unknown, where: string, out: Collector): boolean {
  if (!isObject(raw)) {
    out.error(`${where}: condition must be an object`);
    return false;
  }
  const unknown = unknownKeys(raw, new Set(["au", "presence", "above"]));
  if (unknown.length) {
    out.error(`${where}: unknown condition key(s): ${unknown.join(", ")}`);
    return false;
  }
  const au = raw.au;
  if (!isInt(au)) {
    out.error(`${where}: condition needs an integer 'au'`);
    return false;
  }
  if (!AU_ID_SET.has(au)) {
    out.error(`${where}: AU${au} is not in the tracker's AU set`);
    return false;
  }
  if (au === BLINK_AU) {
    out.error(`${where}: AU45 (blink) is involuntary and cannot be used as a condition`);
    return false;
  }
  if (UNRELIABLE_CONDITION_AUS.has(au)) {
    out.warn(`${where}: AU${au} is unreliably detected; consider a different AU`);
  }
  const hasPresence = "presence" in raw;
  const hasAbove = "above" in raw;
  if (hasPresence === hasAbove) {
    out.error(`${where}: condition needs exactly one of 'presence' or 'above'`);
    return false;
  }
  if (hasPresence) {
    if (raw.presence !== true) {
      out.error(`${where}: 'presence' must be true`);
      return false;
    }
    return true;
  }
  if (!isNum(raw.above)) {
    out.error(`${where}: 'above' must be a number`);
    return false;
  }
  const threshold = Math.round((raw.above as number) * 100) / 100;
  if (!(threshold > 0 && threshold < 5)) {
    out.error(`${where}: threshold ${threshold} outside the open interval (0, 5)`);
    return false;
  }
  return true;
}

function checkRearm(raw: unknown, where: string, out: Collector): boolean {
  if (raw === undefined || raw === null) return true;
  if (!isObject(raw) || !("policy" in raw)) {
    out.error(`${where}: rearm must be an object with a 'policy'`);
    return false;
  }
  if (raw.policy === "release") {
    if (unknownKeys(raw, new Set(["policy"])).length) {
      out.error(`${where}: release rearm takes no extra keys`);
      return false;
    }
    return true;
  }
  if (raw.policy === "refractory") {
    const frames = raw.frames ?? 0;
    if (unknownKeys(raw, new Set(["policy", "frames"])).length || !isInt(frames) || frames < 0) {
      out.error(`${where}: refractory rearm needs integer 'frames' >= 0`);
      return false;
    }
    return true;
  }
  out.error(`${where}: unknown rearm policy '${String(raw.policy)}'`);
  return false;
}

function checkAction(raw: unknown, where: string, out: Collector): [string, string] | null {
  if (!isObject(raw) || Object.keys(raw).length !== 1) {
    out.error(`${where}: action must be a single-key object like {"tap": "1"}`);
    return null;
  }
  const kind = Object.keys(raw)[0];
  const target = raw[kind];
  if (!ACTION_KINDS.has(kind)) {
    out.error(`${where}: unknown action kind '${kind}'`);
    return null;
  }
  if (!isStr(target)) {
    out.error(`${where}: action target must be a non-empty string`);
    return null;
  }
  return [kind, target];
}

function checkActionRefs(
  kind: string,
  target: string,
  where: string,
  keySpace: Set<string>,
  macroIds: Set<string>,
  modeIds: Set<string>,
  out: Collector,
): void {
  if ((kind === "tap" || kind === "toggle") && !keySpace.has(target)) {
    out.error(`${where}: key '${target}' is not in key_space`);
  } else if (kind === "macro" && !macroIds.has(target)) {
    out.error(`${where}: references unknown macro '${target}'`);
  } else if (kind === "switch_mode" && !modeIds.has(target)) {
    out.error(`${where}: references unknown mode '${target}'`);
  }
}

export function validateProfile(document: string | unknown): ValidationResult {
  const out = new Collector();
  let doc: unknown = document;
  if (typeof document === "string") {
    try {
      doc = JSON.parse(document);
    } catch (exc) {
      return { ok: false, errors: [`document is not valid JSON: ${exc}`], warnings: [] };
    }
  }
  if (!isObject(doc)) {
    return { ok: false, errors: ["document root must be an object"], warnings: [] };
  }

  const unknownTop = unknownKeys(doc, TOP_KEYS);
  if (unknownTop.length) {
    out.error(`unknown top-level key(s): ${unknownTop.join(", ")}`);
  }

  if (!isStr(doc.name)) {
    out.error("'name' must be a non-empty string");
  }

  const keySpace: string[] = [];
  if (!Array.isArray(doc.key_space) || doc.key_space.length === 0) {
    out.error("'key_space' must be a non-empty list of symbolic keys");
  } else {
    for (const k of doc.key_space) {
      if (!isStr(k)) out.error(`key_space entry '${String(k)}' must be a non-empty string`);
      else if (keySpace.includes(k)) out.error(`duplicate key '${k}' in key_space`);
      else keySpace.push(k);
    }
  }

  const ep = doc.engine_params ?? {};
  if (!isObject(ep)) {
    out.error("'engine_params' must be an object");
  } else {
    const unknown = unknownKeys(ep, new Set(["frame_threshold", "min_confidence", "tap_hold_ms", "staleness_ms"]));
    if (unknown.length) out.error(`unknown engine_params key(s): ${unknown.join(", ")}`);
    for (const key of ["frame_threshold", "tap_hold_ms", "staleness_ms"] as const) {
      if (key in ep) {
        const floor = key === "frame_threshold" ? 1 : 0;
        if (!isInt(ep[key]) || (ep[key] as number) < floor) {
          out.error(`engine_params.${key} must be a non-negative integer${key === "frame_threshold" ? " >= 1" : ""}`);
        }
      }
    }
    if ("min_confidence" in ep) {
      const mc = ep.min_confidence;
      if (!isNum(mc) || mc < 0 || mc > 1) out.error("engine_params.min_confidence must be in [0, 1]");
    }
  }

  const ruleIds = new Set<string>();
  const rulesRaw = doc.rules;
  if (!Array.isArray(rulesRaw)) {
    out.error("'rules' must be a list");
  } else {
    rulesRaw.forEach((raw, i) => {
      let where = `rules[${i}]`;
      if (!isObject(raw)) {
        out.error(`${where}: must be an object`);
        return;
      }
      const unknown = unknownKeys(raw, RULE_KEYS);
      if (unknown.length) out.error(`${where}: unknown key(s): ${unknown.join(", ")}`);
      const ruleId = raw.rule_id;
      if (!isStr(ruleId)) {
        out.error(`${where}: 'rule_id' must be a non-empty string`);
        return;
      }
      where = `rule '${ruleId}'`;
      if (ruleIds.has(ruleId)) {
        out.error(`duplicate rule_id '${ruleId}'`);
        return;
      }
      ruleIds.add(ruleId);
      const conds = raw.conditions;
      if (!Array.isArray(conds) || conds.length === 0) {
        out.error(`${where}: 'conditions' must be a non-empty list`);
        return;
      }
      const condsOk = conds.map((c) => checkCondition(c, where, out));
      if (condsOk.includes(false)) return;
      if (conds.length < 2 || conds.length > 3) {
        out.warn(
          `${where}: ${conds.length} condition(s); combinations of 2-3 AUs are easiest to make and detect reliably`,
        );
      }
      const frameThreshold = raw.frame_threshold ?? null;
      if (frameThreshold !== null && (!isInt(frameThreshold) || frameThreshold < 1)) {
        out.error(`${where}: frame_threshold must be an integer >= 1`);
        return;
      }
      const minConfidence = raw.min_confidence ?? null;
      if (minConfidence !== null && (!isNum(minConfidence) || minConfidence < 0 || minConfidence > 1)) {
        out.error(`${where}: min_confidence must be in [0, 1]`);
        return;
      }
      if ("priority" in raw && !isInt(raw.priority)) {
        out.error(`${where}: priority must be an integer`);
        return;
      }
      if (!checkRearm(raw.rearm, where, out)) return;
      if ("display_name" in raw && !isStr(raw.display_name)) {
        out.error(`${where}: display_name must be a non-empty string`);
      }
    });
  }

  const macroIds = new Set<string>();
  const macrosRaw = doc.macros ?? [];
  if (!Array.isArray(macrosRaw)) {
    out.error("'macros' must be a list");
  } else {
    macrosRaw.forEach((raw, i) => {
      let where = `macros[${i}]`;
      if (!isObject(raw) || unknownKeys(raw, new Set(["macro_id", "steps"])).length) {
        out.error(`${where}: must be an object with 'macro_id' and 'steps'`);
        return;
      }
      const macroId = raw.macro_id;
      if (!isStr(macroId)) {
        out.error(`${where}: 'macro_id' must be a non-empty string`);
        return;
      }
      where = `macro '${macroId}'`;
      if (macroIds.has(macroId)) {
        out.error(`duplicate macro_id '${macroId}'`);
        return;
      }
      macroIds.add(macroId);
      const steps = raw.steps;
      if (!Array.isArray(steps) || steps.length === 0) {
        out.error(`${where}: 'steps' must be a non-empty list`);
        return;
      }
      steps.forEach((step, j) => {
        if (
          !isObject(step) ||
          unknownKeys(step, new Set(["key", "down_ms", "gap_ms"])).length ||
          !isStr(step.key) ||
          !isInt(step.down_ms) ||
          (step.down_ms as number) < 0 ||
          !isInt(step.gap_ms ?? 0) ||
          ((step.gap_ms ?? 0) as number) < 0
        ) {
          out.error(`${where}: steps[${j}] must be {key, down_ms>=0, gap_ms>=0}`);
          return;
        }
        if (!keySpace.includes(step.key as string)) {
          out.error(`${where}: steps[${j}] key '${step.key}' is not in key_space`);
        }
      });
    });
  }

  const modesRaw = doc.modes;
  const modeIds = new Set<string>(isObject(modesRaw) ? Object.keys(modesRaw) : []);
  const keySpaceSet = new Set(keySpace);
  if (!isObject(modesRaw) || modeIds.size === 0) {
    out.error("'modes' must be a non-empty object");
  } else {
    for (const [modeId, raw] of Object.entries(modesRaw)) {
      const where = `mode '${modeId}'`;
      if (!isObject(raw) || unknownKeys(raw, new Set(["bindings", "keywords"])).length) {
        out.error(`${where}: must be an object with 'bindings' and optional 'keywords'`);
        continue;
      }
      const bindingsRaw = raw.bindings ?? {};
      if (!isObject(bindingsRaw)) {
        out.error(`${where}: 'bindings' must be an object`);
      } else {
        for (const [ruleId, actionRaw] of Object.entries(bindingsRaw)) {
          const bwhere = `${where} binding for rule '${ruleId}'`;
          if (!ruleIds.has(ruleId)) {
            out.error(`${bwhere}: references unknown rule '${ruleId}'`);
            continue;
          }
          const action = checkAction(actionRaw, bwhere, out);
          if (!action) continue;
          checkActionRefs(action[0], action[1], bwhere, keySpaceSet, macroIds, modeIds, out);
        }
      }
      const phrases = new Set<string>();
      const keywordsRaw = raw.keywords ?? [];
      if (!Array.isArray(keywordsRaw)) {
        out.error(`${where}: 'keywords' must be a list`);
        continue;
      }
      keywordsRaw.forEach((kw, j) => {
        const kwhere = `${where} keywords[${j}]`;
        if (
          !isObject(kw) ||
          Object.keys(kw).length !== 2 ||
          !("phrase" in kw) ||
          !("action" in kw)
        ) {
          out.error(`${kwhere}: must be {phrase, action}`);
          return;
        }
        const phrase = kw.phrase;
        if (!isStr(phrase) || phrase !== phrase.toLowerCase() || phrase.includes(" ")) {
          out.error(`${kwhere}: phrase must be a single lowercase word`);
          return;
        }
        if (phrases.has(phrase)) {
          out.error(`${where}: duplicate keyword phrase '${phrase}'`);
          return;
        }
        const action = checkAction(kw.action, kwhere, out);
        if (!action) return;
        checkActionRefs(action[0], action[1], kwhere, keySpaceSet, macroIds, modeIds, out);
        phrases.add(phrase);
      });
    }
  }

  if (!isStr(doc.initial_mode) || !modeIds.has(doc.initial_mode as string)) {
    out.error(`initial_mode '${String(doc.initial_mode)}' is not a defined mode`);
  }

  return { ok: out.errors.length === 0, errors: out.errors, warnings: out.warnings };
}
