// Pure HTML-string renderers. No DOM access, no network: snapshotable.

import type {
  DiagnosticsPayload,
  Message,
  ProvenanceToken,
  UiSessionState,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

// provenance source -> CSS class; fact-copy:<k> collapses to prov-fact-copy
export function provenanceClass(source: string): string {
  return `prov-${source.split(":")[0]}`;
}

export function renderToken(entry: ProvenanceToken): string {
  const cls = provenanceClass(entry.source);
  const title = escapeHtml(entry.source);
  return `<span class="tok ${cls}" title="${title}">${escapeHtml(entry.token)}</span>`;
}

export function renderBetaBadge(state: UiSessionState): string {
  if (state.betaMode.kind === "forced") {
    const value = state.betaMode.value;
    const mode =
      value >= 0.5 ? "divergent" : "convergent";
    return `<span id="beta-badge" class="badge forced">forced ${value.toFixed(1)} (${mode})</span>`;
  }
  const predicted = state.lastDiagnostics?.beta_predicted;
  const suffix =
    predicted === undefined || predicted === null
      ? ""
      : ` (predicted ${predicted.toFixed(2)})`;
  return `<span id="beta-badge" class="badge auto">auto${escapeHtml(suffix)}</span>`;
}

export function renderMessage(message: Message): string {
  if (message.speaker === "user") {
    return `<div class="msg user"><span class="who">you</span> ${escapeHtml(message.text)}</div>`;
  }
  const tokens =
    message.provenance && message.provenance.length
      ? message.provenance.map(renderToken).join(" ")
      : escapeHtml(message.text);
  const beta =
    message.betaUsed === undefined
      ? ""
      : ` <span class="beta">beta=${message.betaUsed.toFixed(2)}</span>`;
  return `<div class="msg system"><span class="who">bot</span>${beta} ${tokens}</div>`;
}

export function renderTranscript(state: UiSessionState): string {
  const body = state.transcript.map(renderMessage).join("\n");
  return `<div id="transcript">${body}</div>`;
}

export function renderDriftPanel(diag: DiagnosticsPayload | null): string {
  if (!diag) {
    return `<div id="drift-panel" class="empty">no drift words yet</div>`;
  }
  const entry = (token: string) => {
    const seed = diag.drift_words.origin[token] ?? "?";
    return `<li><span class="drift-word">${escapeHtml(token)}</span> <span class="seed">from ${escapeHtml(seed)}</span></li>`;
  };
  const contextual = diag.drift_words.contextual.map(entry).join("");
  const factual = diag.drift_words.factual.map(entry).join("");
  return (
    `<div id="drift-panel">` +
    `<h3>contextual drift</h3><ul>${contextual}</ul>` +
    `<h3>factual drift</h3><ul>${factual}</ul>` +
    `</div>`
  );
}

export function renderFactEditor(state: UiSessionState): string {
  const rows = state.facts
    .map(
      (fact, i) =>
        `<li class="fact" data-index="${i}">${escapeHtml(fact)}${renderFactWeight(state, i)}</li>`,
    )
    .join("");
  const error = state.factError
    ? `<div id="fact-error" class="error">${escapeHtml(state.factError)}</div>`
    : "";
  return `<div id="fact-editor"><ul>${rows}</ul>${error}</div>`;
}

function renderFactWeight(state: UiSessionState, index: number): string {
  const weights = state.lastDiagnostics?.fact_attention ?? [];
  if (index >= weights.length) return "";
  const weight = weights[index];
  const top = Math.max(...weights) === weight && weights.length > 1;
  return ` <span class="weight${top ? " top" : ""}">${weight.toFixed(3)}</span>`;
}

export function renderConnection(state: UiSessionState): string {
  const banner =
    state.connection === "offline"
      ? `<div id="error-banner" class="banner error">${escapeHtml(state.lastError ?? "server unreachable")} <button id="retry">retry</button></div>`
      : "";
  return `<div id="connection" class="${state.connection}">${state.connection}</div>${banner}`;
}

export function renderApp(state: UiSessionState): string {
  return [
    renderConnection(state),
    renderBetaBadge(state),
    renderTranscript(state),
    renderFactEditor(state),
    renderDriftPanel(state.lastDiagnostics),
  ].join("\n");
}
