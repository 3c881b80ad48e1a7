// Browser bootstrap: wires the pure state/render modules to the DOM.
// One in-flight turn at a time; controls are disabled while waiting.

import { ApiError, health, sendChat } from "./api.js";
import {
  applyFailure,
  applyResponse,
  beginTurn,
  initialState,
  requestedBeta,
  setBetaAuto,
  setBetaForced,
  setFacts,
} from "./state.js";
import { renderApp } from "./render.js";
import type { UiSessionState } from "./types.js";

const BASE = (window as unknown as { CONDIV_BASE?: string }).CONDIV_BASE ?? "";

let state: UiSessionState = initialState(`web-${Date.now().toString(36)}`);
let inFlight = false;

function paint(): void {
  const app = document.getElementById("app");
  if (app) app.innerHTML = renderApp(state);
  const input = document.getElementById("utterance") as HTMLInputElement | null;
  const send = document.getElementById("send") as HTMLButtonElement | null;
  if (input) input.disabled = inFlight;
  if (send) send.disabled = inFlight;
  const retry = document.getElementById("retry");
  if (retry) retry.addEventListener("click", () => void checkHealth());
}

async function checkHealth(): Promise<void> {
  try {
    await health(BASE);
    state = { ...state, connection: "online", lastError: null };
  } catch (err) {
    state = { ...state, connection: "offline", lastError: String(err) };
  }
  paint();
}

async function submitTurn(): Promise<void> {
  const input = document.getElementById("utterance") as HTMLInputElement | null;
  if (!input || inFlight) return;
  const text = input.value.trim();
  if (!text) return;
  inFlight = true;
  state = beginTurn(state, text);
  paint();
  try {
    const response = await sendChat(BASE, {
      sessionId: state.sessionId,
      text,
      beta: requestedBeta(state),
      facts: state.facts.length ? state.facts : undefined,
    });
    state = applyResponse(state, response);
    input.value = "";
  } catch (err) {
    const message =
      err instanceof ApiError ? `${err.field}: ${err.message}` : String(err);
    state = applyFailure(state, message);
  } finally {
    inFlight = false;
    paint();
  }
}

function wireControls(): void {
  document.getElementById("send")?.addEventListener("click", () => {
    void submitTurn();
  });
  document.getElementById("utterance")?.addEventListener("keydown", (ev) => {
    if ((ev as KeyboardEvent).key === "Enter") void submitTurn();
  });
  const auto = document.getElementById("beta-auto") as HTMLInputElement | null;
  const slider = document.getElementById("beta-slider") as HTMLInputElement | null;
  auto?.addEventListener("change", () => {
    state = auto.checked
      ? setBetaAuto(state)
      : setBetaForced(state, Number(slider?.value ?? "0"));
    if (slider) slider.disabled = auto.checked;
    paint();
  });
  slider?.addEventListener("input", () => {
    if (auto && !auto.checked) {
      state = setBetaForced(state, Number(slider.value));
      paint();
    }
  });
  const factBox = document.getElementById("facts") as HTMLTextAreaElement | null;
  factBox?.addEventListener("change", () => {
    state = setFacts(state, factBox.value.split("\n"));
    paint();
  });
}

window.addEventListener("DOMContentLoaded", () => {
  wireControls();
  paint();
  void checkHealth();
});
