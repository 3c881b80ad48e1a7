// Thin typed client over the v1 endpoints. `fetchImpl` is injectable so
// tests can stub the network.

import type { ApiErrorBody, ChatResponse, HealthResponse } from "./types.js";

export class ApiError extends Error {
  status: number;
  field: string;

  constructor(status: number, field: string, message: string) {
    super(message);
    this.status = status;
    this.field = field;
  }
}

export interface ChatTurnRequest {
  sessionId: string;
  text: string;
  beta?: number | null;
  facts?: string[] | null;
  seed?: number | null;
  k?: number;
}

type FetchLike = typeof fetch;

async function parseError(response: Response): Promise<ApiError> {
  try {
    const body = (await response.json()) as ApiErrorBody;
    return new ApiError(response.status, body.error.field, body.error.message);
  } catch {
    return new ApiError(response.status, "unknown", `HTTP ${response.status}`);
  }
}

export async function health(
  base: string,
  fetchImpl: FetchLike = fetch,
): Promise<HealthResponse> {
  const response = await fetchImpl(`${base}/v1/health`);
  if (!response.ok) throw await parseError(response);
  return (await response.json()) as HealthResponse;
}

export async function sendChat(
  base: string,
  turn: ChatTurnRequest,
  fetchImpl: FetchLike = fetch,
): Promise<ChatResponse> {
  const body: Record<string, unknown> = {
    session_id: turn.sessionId,
    text: turn.text,
  };
  if (turn.beta !== undefined && turn.beta !== null) body.beta = turn.beta;
  if (turn.facts !== undefined && turn.facts !== null) body.facts = turn.facts;
  if (turn.seed !== undefined && turn.seed !== null) body.seed = turn.seed;
  if (turn.k !== undefined) body.k = turn.k;
  const response = await fetchImpl(`${base}/v1/chat`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!response.ok) throw await parseError(response);
  return (await response.json()) as ChatResponse;
}
