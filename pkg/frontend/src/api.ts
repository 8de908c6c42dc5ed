import type {
  FeedbackResult,
  LabelSummary,
  NextPayload,
  SessionParams,
  StatusPayload,
  Verdict,
  VerifyPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

/** Thin typed client for the session REST API; one base-URL setting. */
export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = globalThis.fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(
        response.status,
        (body as { code?: string }).code ?? "http_error",
        (body as { error?: string }).error ?? `HTTP ${response.status}`,
      );
    }
    return body as T;
  }

  createSession(params: SessionParams): Promise<StatusPayload> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify(params),
    });
  }

  status(sessionId: string): Promise<StatusPayload> {
    return this.request(`/sessions/${sessionId}/status`);
  }

  next(sessionId: string): Promise<NextPayload> {
    return this.request(`/sessions/${sessionId}/next`);
  }

  submitLabel(
    sessionId: string,
    mentionId: string,
    labels: string[],
  ): Promise<LabelSummary> {
    return this.request(`/sessions/${sessionId}/label`, {
      method: "POST",
      body: JSON.stringify({ mention_id: mentionId, labels }),
    });
  }

  verificationBatch(sessionId: string): Promise<VerifyPayload> {
    return this.request(`/sessions/${sessionId}/verify`);
  }

  submitFeedback(
    sessionId: string,
    verdicts: Record<string, Verdict>,
  ): Promise<FeedbackResult> {
    return this.request(`/sessions/${sessionId}/feedback`, {
      method: "POST",
      body: JSON.stringify({ verdicts }),
    });
  }

  predict(
    sessionId: string,
    mention: string,
  ): Promise<{ tokens: string[]; labels: string[]; confidence: number }> {
    return this.request(`/sessions/${sessionId}/predict`, {
      method: "POST",
      body: JSON.stringify({ mention }),
    });
  }
}
