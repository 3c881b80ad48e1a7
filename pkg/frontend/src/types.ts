// Wire types for the v1 HTTP API. The UI performs no inference of its own:
// every number it shows originates from a DiagnosticsPayload verbatim.

export interface ProvenanceToken {
  token: string;
  source: string; // vocab | context-copy | fact-copy:<k> | drift-contextual | drift-factual
}

export interface TopCandidate {
  token: string;
  token_id: number;
  probability: number;
  masses: Record<string, number>;
}

export interface StepInfo {
  divergent_prob: number;
  mix_weights: number[];
  fact_attention: number[];
  renormalized: boolean;
  sampled_token: string;
  provenance: string;
  top_candidates: TopCandidate[];
}

export interface DriftWords {
  contextual: string[];
  factual: string[];
  origin: Record<string, string>;
}

export interface DiagnosticsPayload {
  beta_predicted: number;
  beta_used: number;
  seed: number;
  tokens: string[];
  provenance: ProvenanceToken[];
  drift_words: DriftWords;
  fact_attention: number[];
  steps: StepInfo[];
}

export interface ChatResponse {
  schema: string;
  session_id: string;
  text: string;
  diagnostics: DiagnosticsPayload;
}

export interface ApiErrorBody {
  schema: string;
  error: { field: string; message: string };
}

export interface HealthResponse {
  schema: string;
  status: string;
  checkpoint: string;
  uptime_s: number;
}

export type BetaMode = { kind: "auto" } | { kind: "forced"; value: number };

export interface Message {
  speaker: "user" | "system";
  text: string;
  tokens?: string[];
  provenance?: ProvenanceToken[];
  betaUsed?: number;
  betaPredicted?: number;
}

export type ConnectionStatus = "idle" | "waiting" | "online" | "offline";

export interface UiSessionState {
  sessionId: string;
  transcript: Message[];
  betaMode: BetaMode;
  facts: string[];
  factError: string | null;
  lastDiagnostics: DiagnosticsPayload | null;
  connection: ConnectionStatus;
  lastError: string | null;
}

export const MAX_FACTS = 4;
