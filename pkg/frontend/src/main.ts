// DOM wiring for the calibration panel. All live indications come from
// server telemetry; this file renders state and forwards edits.

import { FacekeyClient, ConnectionState } from "./api.js";
import { fireCue } from "./audio.js";
import { BarRow, barModel, confidenceState, minRuleConfidence, ruleRows } from "./bars.js";
import { ProfileDraft } from "./state.js";
import {
  FramePayload,
  KeyEventPayload,
  StatusDoc,
  TriggerPayload,
  actionKind,
  actionTarget,
} from "./types.js";

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

const apiBase = new URLSearchParams(location.search).get("api") ?? location.origin;
const client = new FacekeyClient(apiBase);

let draft: ProfileDraft | null = null;
let status: StatusDoc | null = null;
let lastFrame: FramePayload | null = null;
let watchingRule: string | null = null;
let recentFires = new Map<string, number>(); // rule_id -> wall ms of last fire
const eventLog: KeyEventPayload[] = [];

// -- rendering ---------------------------------------------------------------

function renderBanner(state: ConnectionState): void {
  const banner = $("banner");
  banner.dataset.state = state;
  banner.textContent =
    state === "open" ? "live" : state === "connecting" ? "reconnecting to engine..." : "disconnected";
}

function renderStatusLine(): void {
  if (!status) return;
  $("profile-name").textContent = status.active_profile;
  $("mode-name").textContent = status.active_mode;
  $("fps").textContent = status.fps ? status.fps.toFixed(1) : "-";
  $("held-keys").textContent = status.held_keys.length ? status.held_keys.join(" ") : "none";
  $("errors").textContent = status.last_errors.slice(-3).join(" | ");
  const stale = draft && status.version !== draft.version;
  $("version-note").textContent = stale
    ? `profile changed on the engine (v${status.version}); reload to edit`
    : `v${status.version}`;
}

function renderBars(): void {
  if (!draft || !lastFrame) return;
  const rows = barModel(lastFrame, draft.doc);
  const container = $("bars");
  container.innerHTML = rows
    .map(
      (row: BarRow) => `
      <div class="bar-row${row.overThreshold ? " over" : ""}">
        <span class="bar-label" title="${row.name}">AU${row.au}</span>
        <div class="bar-track">
          <div class="bar-fill" style="width:${row.widthPct.toFixed(1)}%"></div>
          ${row.markers
            .map(
              (m) =>
                `<div class="bar-marker" title="${m.ruleId} &gt; ${m.threshold}" style="left:${m.leftPct.toFixed(1)}%"></div>`,
            )
            .join("")}
        </div>
        <span class="bar-value">${row.intensity.toFixed(2)}${row.present ? " •" : ""}</span>
      </div>`,
    )
    .join("");
  const confidence = lastFrame.confidence;
  const state = confidenceState(confidence, minRuleConfidence(draft.doc));
  const indicator = $("confidence");
  indicator.dataset.state = state;
  indicator.textContent = `confidence ${confidence.toFixed(2)}${state === "warn" ? " (low: rules gated)" : ""}`;
}

function renderRules(): void {
  if (!draft) return;
  const now = performance.now();
  const rows = ruleRows(draft.doc, status);
  $("rules").innerHTML = rows
    .map((row) => {
      const firedRecently = (recentFires.get(row.ruleId) ?? -1e9) > now - 600;
      return `
      <div class="rule-row${row.matched ? " matched" : ""}${firedRecently ? " fired" : ""}" data-rule="${row.ruleId}">
        <span class="rule-name">${row.displayName}</span>
        <span class="rule-conds">${row.conditionSummary}</span>
        <span class="rule-count">${row.consecutiveCount}/${row.frameThreshold}</span>
        <span class="rule-fires">${row.totalFires} fires</span>
        <span class="rule-bound">${row.bound ? "bound" : "unbound"}</span>
        <button class="test-btn" data-rule="${row.ruleId}">test</button>
      </div>`;
    })
    .join("");
}

function renderEditor(): void {
  if (!draft) return;
  const doc = draft.doc;
  const validation = draft.validate();
  const mode = doc.modes[doc.initial_mode];
  $("editor").innerHTML = doc.rules
    .map((rule, _ruleIndex) => {
      const sliders = rule.conditions
        .map((condition, i) => {
          if (condition.presence) {
            return `<label class="cond">AU${condition.au} presence</label>`;
          }
          return `
          <label class="cond">AU${condition.au} &gt;
            <input type="range" min="0.1" max="4.9" step="0.1" value="${condition.above}"
                   data-rule="${rule.rule_id}" data-cond="${i}" class="threshold-slider">
            <span class="thr-value">${condition.above?.toFixed(1)}</span>
          </label>`;
        })
        .join("");
      const binding = mode?.bindings[rule.rule_id];
      const bindingText = binding ? `${actionKind(binding)} ${actionTarget(binding)}` : "unbound";
      return `
      <div class="edit-row" data-rule="${rule.rule_id}">
        <span class="rule-name">${rule.display_name}</span>
        ${sliders}
        <label class="cond">frames
          <input type="number" min="1" max="30" value="${rule.frame_threshold}"
                 data-rule="${rule.rule_id}" class="frames-input">
        </label>
        <span class="binding">${bindingText}</span>
      </div>`;
    })
    .join("");
  const applyButton = $("apply") as HTMLButtonElement;
  applyButton.disabled = !draft.canApply;
  $("draft-state").textContent = draft.dirty ? (validation.ok ? "edited" : "invalid") : "clean";
  $("validation").innerHTML =
    validation.errors.map((e) => `<div class="v-error">${e}</div>`).join("") +
    validation.warnings.map((w) => `<div class="v-warning">${w}</div>`).join("");
}

function renderEvents(): void {
  $("events").innerHTML = eventLog
    .slice(-14)
    .map((e) => `<div class="key-event ${e.edge}">${e.timestamp_ms} ${e.key} ${e.edge} <i>${e.source}</i></div>`)
    .reverse()
    .join("");
  $("watch-note").textContent = watchingRule
    ? `watching for ${watchingRule} - make the expression or use its keyword`
    : "";
}

// -- wiring --------------------------------------------------------------------

function wireEditor(): void {
  $("editor").addEventListener("input", (event) => {
    const target = event.target as HTMLInputElement;
    if (!draft) return;
    if (target.classList.contains("threshold-slider")) {
      draft.setConditionThreshold(target.dataset.rule!, Number(target.dataset.cond), Number(target.value));
      const label = target.nextElementSibling;
      if (label) label.textContent = Number(target.value).toFixed(1);
    } else if (target.classList.contains("frames-input")) {
      draft.setFrameThreshold(target.dataset.rule!, Number(target.value));
    }
    const applyButton = $("apply") as HTMLButtonElement;
    applyButton.disabled = !draft.canApply;
    $("draft-state").textContent = draft.dirty ? (draft.validate().ok ? "edited" : "invalid") : "clean";
  });

  $("rules").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.classList.contains("test-btn")) {
      watchingRule = target.dataset.rule ?? null;
      eventLog.length = 0;
      renderEvents();
    }
  });

  $("apply").addEventListener("click", async () => {
    if (!draft) return;
    const result = await draft.apply(client);
    if (result.ok) {
      $("validation").innerHTML = `<div class="v-ok">applied at frame ${result.appliedFrameIndex} (v${result.version})</div>`;
    } else if (result.conflict) {
      $("validation").innerHTML =
        `<div class="v-error">profile changed on the engine (v${result.serverVersion}); reload to continue</div>`;
    } else {
      $("validation").innerHTML = result.errors.map((e) => `<div class="v-error">${e}</div>`).join("");
    }
    renderEditor();
  });

  $("reload").addEventListener("click", () => void loadDraft());
  $("revert").addEventListener("click", () => {
    draft?.revert();
    renderEditor();
  });

  $("say").addEventListener("click", () => {
    const input = $("say-text") as HTMLInputElement;
    if (input.value) void client.injectTranscript(input.value);
  });
}

async function loadDraft(): Promise<void> {
  draft = await ProfileDraft.load(client);
  renderEditor();
  renderRules();
}

async function pollStatus(): Promise<void> {
  try {
    status = await client.getStatus();
    renderStatusLine();
    renderRules();
  } catch {
    // banner reflects stream state; status poll errors are transient
  }
}

function start(): void {
  wireEditor();
  void loadDraft();
  setInterval(() => void pollStatus(), 500);

  client.subscribe<FramePayload>(
    "frames",
    (frame) => {
      lastFrame = frame;
      renderBars();
    },
    renderBanner,
  );
  client.subscribe<TriggerPayload>("triggers", (trigger) => {
    recentFires.set(trigger.rule_id, performance.now());
    fireCue();
    renderRules();
  });
  client.subscribe<KeyEventPayload>("keyevents", (event) => {
    if (watchingRule !== null) {
      eventLog.push(event);
      renderEvents();
    }
  });
}

start();
