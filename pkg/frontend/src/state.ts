// Pure state transitions; rendering is a pure function of UiSessionState,
// so every branch here is directly unit-testable.

import {
  ChatResponse,
  MAX_FACTS,
  Message,
  UiSessionState,
} from "./types.js";

export function initialState(sessionId: string): UiSessionState {
  return {
    sessionId,
    transcript: [],
    betaMode: { kind: "auto" },
    facts: [],
    factError: null,
    lastDiagnostics: null,
    connection: "idle",
    lastError: null,
  };
}

export function requestedBeta(state: UiSessionState): number | null {
  return state.betaMode.kind === "forced" ? state.betaMode.value : null;
}

export function beginTurn(state: UiSessionState, text: string): UiSessionState {
  const user: Message = { speaker: "user", text };
  return {
    ...state,
    transcript: [...state.transcript, user],
    connection: "waiting",
    lastError: null,
  };
}

export function applyResponse(
  state: UiSessionState,
  response: ChatResponse,
): UiSessionState {
  const diag = response.diagnostics;
  const system: Message = {
    speaker: "system",
    text: response.text,
    tokens: diag.tokens,
    provenance: diag.provenance,
    betaUsed: diag.beta_used,
    betaPredicted: diag.beta_predicted,
  };
  return {
    ...state,
    transcript: [...state.transcript, system],
    lastDiagnostics: diag,
    connection: "online",
    lastError: null,
  };
}

// A failed turn must leave the transcript exactly as it was before the
// user message was speculatively appended.
export function applyFailure(
  state: UiSessionState,
  message: string,
): UiSessionState {
  const transcript = [...state.transcript];
  if (transcript.length && transcript[transcript.length - 1].speaker === "user") {
    transcript.pop();
  }
  return { ...state, transcript, connection: "offline", lastError: message };
}

export function setBetaAuto(state: UiSessionState): UiSessionState {
  return { ...state, betaMode: { kind: "auto" } };
}

export function setBetaForced(
  state: UiSessionState,
  value: number,
): UiSessionState {
  const clamped = Math.min(1, Math.max(0, value));
  return { ...state, betaMode: { kind: "forced", value: clamped } };
}

export function setFacts(state: UiSessionState, facts: string[]): UiSessionState {
  const cleaned = facts.map((f) => f.trim()).filter((f) => f.length > 0);
  if (cleaned.length > MAX_FACTS) {
    return {
      ...state,
      factError: `at most ${MAX_FACTS} facts are allowed (got ${cleaned.length})`,
    };
  }
  return { ...state, facts: cleaned, factError: null };
}
