/** Typed client for the chronorank service. Every number the UI shows comes
 * from these response payloads verbatim; the client never post-processes
 * domain values. */

export interface RankedHit {
  doc_id: string;
  similarity: number;
  year: number;
}

export interface YearEstimate {
  predicted_year: number;
  neighbor_ids: string[];
  weights: number[];
}

export interface QueryResponse {
  hits: RankedHit[];
  estimate: YearEstimate;
  model_version: string;
}

export interface MatrixDoc {
  years: number[];
  values: number[][];
  provenance: string;
  spec?: unknown;
  matrix_version: string;
}

export type MatrixEdit =
  | { op: "boost"; lo: number; hi: number; factor: number }
  | { op: "set"; query_year: number; item_year: number; value: number };

export interface FeedbackPayload {
  doc_id: string;
  features: number[];
  year: number;
}

export interface FeedbackResponse {
  index_size: number;
  model_version: string;
}

export interface JobReport {
  iterations: number;
  losses: number[];
  final_loss: number | null;
  model_version: string;
}

export interface RetrainJobView {
  job_id: string;
  state: "queued" | "running" | "done" | "failed";
  matrix_version: string;
  config: Record<string, unknown>;
  iteration?: number;
  loss?: number;
  report?: JobReport;
  reason?: string;
}

export interface ProjectionPoint {
  year: number;
  x: number;
  y: number;
}

export interface ProjectionResponse {
  points: ProjectionPoint[];
  excluded_years: number[];
  model_version: string;
}

export interface MetricsResponse {
  mae: number;
  map: number;
  n_queries: number;
  model_version: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Structural subset of fetch so tests can inject a scripted double. */
export interface MinimalResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<MinimalResponse>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: Parameters<FetchLike>[1] = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const payload = (await response.json()) as Record<string, unknown>;
    if (!response.ok) {
      const envelope = (payload?.error ?? {}) as {
        code?: string;
        message?: string;
        details?: unknown;
      };
      throw new ApiError(
        response.status,
        envelope.code ?? "unknown_error",
        envelope.message ?? `request failed with status ${response.status}`,
        envelope.details,
      );
    }
    return payload as T;
  }

  health(): Promise<{ status: string; model_version: string | null }> {
    return this.request("GET", "/health");
  }

  query(body: {
    features?: number[];
    doc_id?: string;
    top_k?: number;
    k_estimate?: number;
  }): Promise<QueryResponse> {
    return this.request("POST", "/query", body);
  }

  submitFeedback(payload: FeedbackPayload): Promise<FeedbackResponse> {
    return this.request("POST", "/feedback/label", payload);
  }

  getMatrix(version?: string): Promise<MatrixDoc> {
    const suffix = version ? `?version=${encodeURIComponent(version)}` : "";
    return this.request("GET", `/relevance-matrix${suffix}`);
  }

  getMatrixVersions(): Promise<{ versions: string[]; current: string | null }> {
    return this.request("GET", "/relevance-matrix/versions");
  }

  putMatrix(edit: MatrixEdit): Promise<{ matrix_version: string; warning?: string }> {
    return this.request("PUT", "/relevance-matrix", edit);
  }

  submitRetrain(body: {
    matrix_version?: string;
    iterations?: number;
    learning_rate?: number;
    batch_size?: number;
    temperature?: number;
    seed?: number;
    init_seed?: number;
  }): Promise<{ job_id: string }> {
    return this.request("POST", "/retrain", body);
  }

  getJob(jobId: string): Promise<RetrainJobView> {
    return this.request("GET", `/retrain/${encodeURIComponent(jobId)}`);
  }

  getProjection(): Promise<ProjectionResponse> {
    return this.request("GET", "/projection");
  }

  getMetrics(): Promise<MetricsResponse> {
    return this.request("GET", "/metrics?split=test");
  }
}

const escapes: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => escapes[ch]);
}
