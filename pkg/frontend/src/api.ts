/** Typed client for the analysis service; the only configuration is the base URL. */

import type { RoundResponse } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string, private fetchFn: typeof fetch = fetch) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = `${detail}: ${body.detail}`;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(detail, response.status);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("/health");
  }

  createSession(bindings: Record<string, string> = {}): Promise<{ session_id: string }> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ bindings }),
    });
  }

  postRound(sessionId: string, text: string): Promise<RoundResponse> {
    return this.request(`/sessions/${sessionId}/rounds`, {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }
}
