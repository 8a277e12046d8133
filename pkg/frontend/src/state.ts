// Profile draft store: local edits, dirty tracking, guarded apply.
//
// The draft mirrors the server document plus a version token. It is never
// submitted while client-side validation fails; a version conflict on apply
// signals that someone else edited the profile and the draft must reload.

import type { FacekeyClient, ApplyResult } from "./api.js";
import type { ActionDoc, ProfileDoc, ValidationResult } from "./types.js";
import { validateProfile } from "./validate.js";

function clone<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

export class ProfileDraft {
  doc: ProfileDoc;
  version: number;
  private pristine: string;
  readonly dirtyPaths = new Set<string>();

  constructor(doc: ProfileDoc, version: number) {
    this.doc = clone(doc);
    this.version = version;
    this.pristine = JSON.stringify(doc);
  }

  static async load(client: FacekeyClient): Promise<ProfileDraft> {
    const [doc, status] = await Promise.all([client.getProfile(), client.getStatus()]);
    return new ProfileDraft(doc, status.version);
  }

  get dirty(): boolean {
    return JSON.stringify(this.doc) !== this.pristine;
  }

  validate(): ValidationResult {
    return validateProfile(this.doc);
  }

  get canApply(): boolean {
    return this.dirty && this.validate().ok;
  }

  private touch(path: string): void {
    this.dirtyPaths.add(path);
  }

  rule(ruleId: string) {
    const rule = this.doc.rules.find((r) => r.rule_id === ruleId);
    if (!rule) throw new Error(`unknown rule ${ruleId}`);
    return rule;
  }

  setConditionThreshold(ruleId: string, conditionIndex: number, value: number): void {
    const condition = this.rule(ruleId).conditions[conditionIndex];
    if (!condition) throw new Error(`rule ${ruleId} has no condition ${conditionIndex}`);
    delete condition.presence;
    condition.above = Math.round(value * 100) / 100;
    this.touch(`rules.${ruleId}.conditions.${conditionIndex}.above`);
  }

  setConditionPresence(ruleId: string, conditionIndex: number): void {
    const condition = this.rule(ruleId).conditions[conditionIndex];
    if (!condition) throw new Error(`rule ${ruleId} has no condition ${conditionIndex}`);
    delete condition.above;
    condition.presence = true;
    this.touch(`rules.${ruleId}.conditions.${conditionIndex}.presence`);
  }

  setFrameThreshold(ruleId: string, frames: number): void {
    this.rule(ruleId).frame_threshold = frames;
    this.touch(`rules.${ruleId}.frame_threshold`);
  }

  setBinding(modeId: string, ruleId: string, action: ActionDoc): void {
    const mode = this.doc.modes[modeId];
    if (!mode) throw new Error(`unknown mode ${modeId}`);
    mode.bindings[ruleId] = action;
    this.touch(`modes.${modeId}.bindings.${ruleId}`);
  }

  removeBinding(modeId: string, ruleId: string): void {
    const mode = this.doc.modes[modeId];
    if (!mode) throw new Error(`unknown mode ${modeId}`);
    delete mode.bindings[ruleId];
    this.touch(`modes.${modeId}.bindings.${ruleId}`);
  }

  setKeyword(modeId: string, phrase: string, action: ActionDoc): void {
    const mode = this.doc.modes[modeId];
    if (!mode) throw new Error(`unknown mode ${modeId}`);
    const existing = mode.keywords.find((kw) => kw.phrase === phrase);
    if (existing) existing.action = action;
    else mode.keywords.push({ phrase, action });
    this.touch(`modes.${modeId}.keywords.${phrase}`);
  }

  removeKeyword(modeId: string, phrase: string): void {
    const mode = this.doc.modes[modeId];
    if (!mode) throw new Error(`unknown mode ${modeId}`);
    mode.keywords = mode.keywords.filter((kw) => kw.phrase !== phrase);
    this.touch(`modes.${modeId}.keywords.${phrase}`);
  }

  revert(): void {
    this.doc = JSON.parse(this.pristine) as ProfileDoc;
    this.dirtyPaths.clear();
  }

  /** Apply the draft; refuses locally invalid documents without a request. */
  async apply(client: FacekeyClient): Promise<ApplyResult> {
    const validation = this.validate();
    if (!validation.ok) {
      return { ok: false, errors: validation.errors, warnings: validation.warnings };
    }
    const result = await client.putProfile(this.doc, this.version);
    if (result.ok) {
      this.version = result.version;
      this.pristine = JSON.stringify(this.doc);
      this.dirtyPaths.clear();
    }
    return result;
  }
}
