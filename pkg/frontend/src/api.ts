/** Typed client for the odeal annotation service HTTP/JSON API. */

export interface ContextRow {
  index: number;
  timestamp: number;
  pressure: number;
  temperature: number;
  salinity: number;
  is_queried: boolean;
}

export interface PendingInstance {
  index: number;
  features: Record<string, number>;
  units: Record<string, string>;
  selection_score: number;
  model_p1: number | null;
  model_entropy: number | null;
  context: ContextRow[];
}

export interface PendingBatch {
  kind: "initial" | "query";
  size: number;
  remaining_budget: number;
  instances: PendingInstance[];
}

export interface CurvePoint {
  cycle: number;
  labels_spent: number;
  f1: number;
}

export interface SessionStatus {
  session_id: string;
  dataset_id: string;
  phase: "awaiting_labels" | "training" | "done";
  revision: number;
  initial_labeling: string;
  n_initial: number;
  n_queried: number;
  budget: number;
  labels_spent: number;
  confidence_tau: number;
  max_entropy: number | null;
  class_balance: { good: number; bad: number };
  curve: CurvePoint[];
  f1_available: boolean;
  stop_reason: string | null;
  predictions_url?: string;
  report_url?: string;
}

export interface SessionEnvelope {
  session_id: string;
  phase: string;
  revision: number;
  pending: PendingBatch | null;
  status?: SessionStatus;
}

export interface ServiceError {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export type ApiResult<T> =
  | { ok: true; status: number; body: T }
  | { ok: false; status: number; error: ServiceError };

async function asResult<T>(response: Response): Promise<ApiResult<T>> {
  if (response.ok) {
    return { ok: true, status: response.status, body: (await response.json()) as T };
  }
  let error: ServiceError;
  try {
    error = (await response.json()) as ServiceError;
  } catch {
    error = { code: "http_error", message: response.statusText, details: {} };
  }
  return { ok: false, status: response.status, error };
}

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async uploadDataset(csvText: string): Promise<ApiResult<{ dataset_id: string; rows: number; error_rate: number }>> {
    const response = await this.fetchImpl(this.url("/datasets"), {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: csvText,
    });
    return asResult(response);
  }

  async createSession(
    datasetId: string,
    config: Record<string, unknown>,
    initialLabeling: "external" | "trusted",
  ): Promise<ApiResult<SessionEnvelope>> {
    const response = await this.fetchImpl(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        dataset_id: datasetId,
        config,
        initial_labeling: initialLabeling,
      }),
    });
    return asResult(response);
  }

  async fetchPending(sessionId: string): Promise<ApiResult<SessionEnvelope>> {
    const response = await this.fetchImpl(this.url(`/sessions/${sessionId}/pending`));
    return asResult(response);
  }

  async submitLabels(
    sessionId: string,
    labels: Record<string, 0 | 1>,
    revision: number,
  ): Promise<ApiResult<SessionEnvelope>> {
    const response = await this.fetchImpl(this.url(`/sessions/${sessionId}/labels`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ labels, revision }),
    });
    return asResult(response);
  }

  async fetchStatus(sessionId: string): Promise<ApiResult<SessionStatus>> {
    const response = await this.fetchImpl(this.url(`/sessions/${sessionId}/status`));
    return asResult(response);
  }
}
