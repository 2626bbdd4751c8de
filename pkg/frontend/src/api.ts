/**
 * Typed client for the review service API. One method per endpoint,
 * no caching, no retries: the server is the single source of truth and
 * a page reload must reproduce its state exactly.
 */

import type {
  DecisionRequest,
  DecisionResult,
  EntryDetail,
  QueuePage,
  RecordJson,
  StatsResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
    public readonly detail: unknown = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** 409 from a decision POST: someone already decided differently. */
export class ConflictError extends ApiError {
  constructor(
    message: string,
    public readonly record: RecordJson,
  ) {
    super(409, message);
    this.name = "ConflictError";
  }
}

export interface QueueQuery {
  status?: string;
  page?: number;
  pageSize?: number;
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    private readonly token: string | null = null,
    fetchFn?: FetchLike,
  ) {
    // Bind lazily so the global fetch keeps its expected `this`.
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private headers(withBody: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (withBody) h["Content-Type"] = "application/json";
    if (this.token !== null) h["X-Auth-Token"] = this.token;
    return h;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // non-JSON error pages fall through with a null body
    }
    if (response.ok) return body as T;

    const detail = (body as { detail?: unknown } | null)?.detail ?? null;
    if (response.status === 409 && isConflictDetail(detail)) {
      throw new ConflictError(detail.message, detail.record);
    }
    const message = typeof detail === "string" ? detail : `HTTP ${response.status}`;
    throw new ApiError(response.status, message, detail);
  }

  stats(): Promise<StatsResponse> {
    return this.request("/api/stats", { headers: this.headers(false) });
  }

  queue(query: QueueQuery = {}): Promise<QueuePage> {
    const params = new URLSearchParams();
    if (query.status !== undefined) params.set("status", query.status);
    if (query.page !== undefined) params.set("page", String(query.page));
    if (query.pageSize !== undefined) params.set("page_size", String(query.pageSize));
    const qs = params.toString();
    return this.request(`/api/queue${qs ? `?${qs}` : ""}`, {
      headers: this.headers(false),
    });
  }

  entry(id: number): Promise<EntryDetail> {
    return this.request(`/api/entries/${id}`, { headers: this.headers(false) });
  }

  decide(id: number, body: DecisionRequest): Promise<DecisionResult> {
    return this.request(`/api/entries/${id}/decision`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
  }
}

function isConflictDetail(
  detail: unknown,
): detail is { message: string; record: RecordJson } {
  return (
    typeof detail === "object" &&
    detail !== null &&
    "record" in detail &&
    "message" in detail
  );
}
