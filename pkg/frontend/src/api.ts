// Typed client for the planning service's JSON endpoints.  This module is
// the only place the UI talks to the network; everything else consumes the
// interfaces it returns.

export type AnswerKind = 'task_result' | 'default_response' | 'execution_failure';

export interface TokenUsage {
  input_tokens: number;
  output_tokens: number;
}

export interface AnswerPayload {
  kind: AnswerKind;
  logs: string[];
  snippet: string | null;
  usage: TokenUsage;
}

export interface LogEntry {
  query: string;
  route: 'in_domain' | 'out_of_domain';
  logs: string[];
  usage: TokenUsage;
  latency_ms: number;
  plan_version_before: number;
  plan_version_after: number;
  snippet?: string;
}

export interface ChatResponse {
  session_id: string;
  answer: AnswerPayload;
  entry: LogEntry;
}

export interface PlanLinePayload {
  demand_id: string;
  supplier_id: string;
  method: string;
  ship_week: number;
  dock_week: number;
  line_cost: string;
  ideal_dock_week?: number;
}

export interface PlanPayload {
  version: number;
  total_cost: string;
  lines: PlanLinePayload[];
}

export interface HealthPayload {
  status: string;
  instance: string;
  backend: string;
}

/** Thrown for any non-2xx response; carries the HTTP status for UI decisions. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string
  ) {
    super(detail);
    this.name = 'ApiError';
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body && typeof body.detail === 'string') detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export interface Api {
  chat(query: string, sessionId: string | null): Promise<ChatResponse>;
  plan(): Promise<PlanPayload | null>;
  sessionLog(sessionId: string): Promise<LogEntry[]>;
  health(): Promise<HealthPayload>;
}

export function createApi(baseUrl: string, fetchImpl: typeof fetch = fetch): Api {
  const base = baseUrl.replace(/\/$/, '');
  return {
    async chat(query: string, sessionId: string | null): Promise<ChatResponse> {
      const body: { query: string; session_id?: string } = { query };
      if (sessionId) body.session_id = sessionId;
      const response = await fetchImpl(`${base}/chat`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(body),
      });
      return asJson<ChatResponse>(response);
    },

    async plan(): Promise<PlanPayload | null> {
      const response = await fetchImpl(`${base}/plan`);
      if (response.status === 404) return null; // nothing committed yet
      return asJson<PlanPayload>(response);
    },

    async sessionLog(sessionId: string): Promise<LogEntry[]> {
      const response = await fetchImpl(`${base}/sessions/${sessionId}/log`);
      return asJson<LogEntry[]>(response);
    },

    async health(): Promise<HealthPayload> {
      const response = await fetchImpl(`${base}/health`);
      return asJson<HealthPayload>(response);
    },
  };
}
