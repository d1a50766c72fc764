import type {
  DatasetList,
  FeedbackRequest,
  FeedbackResponse,
  ProjectionResponse,
  SearchRequest,
  SearchResponse,
  SessionOpenResponse,
  SessionStateResponse,
} from './types.js';

/** Error carrying the HTTP status and the server's detail message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = 'ApiError';
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

/**
 * Thin typed client for the vecsearch HTTP API.
 *
 * Every call resolves to the parsed JSON body or rejects with ApiError
 * (HTTP-level failure, body's `detail` as the message) or the underlying
 * network error. No response is reshaped: callers see server order.
 */
export class ApiClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await res.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = null;
    }
    if (!res.ok) {
      const detail =
        parsed && typeof parsed === 'object' && 'detail' in parsed
          ? String((parsed as { detail: unknown }).detail)
          : `HTTP ${res.status}`;
      throw new ApiError(res.status, detail);
    }
    return parsed as T;
  }

  listDatasets(): Promise<DatasetList> {
    return this.request('GET', '/datasets');
  }

  registerDataset(body: {
    name: string;
    vset_path: string;
    meta_path?: string;
    scenes_path?: string;
  }): Promise<{ name: string; count: number; dim: number; metric: string }> {
    return this.request('POST', '/datasets', body);
  }

  projection(dataset: string, dims = 2): Promise<ProjectionResponse> {
    return this.request(
      'GET',
      `/datasets/${encodeURIComponent(dataset)}/projection?dims=${dims}`,
    );
  }

  search(body: SearchRequest): Promise<SearchResponse> {
    return this.request('POST', '/search', body);
  }

  openSession(dataset: string): Promise<SessionOpenResponse> {
    return this.request('POST', '/sessions', { dataset });
  }

  sessionState(sessionId: string): Promise<SessionStateResponse> {
    return this.request(
      'GET',
      `/sessions/${encodeURIComponent(sessionId)}`,
    );
  }

  feedback(sessionId: string, body: FeedbackRequest): Promise<FeedbackResponse> {
    return this.request(
      'POST',
      `/sessions/${encodeURIComponent(sessionId)}/feedback`,
      body,
    );
  }
}
