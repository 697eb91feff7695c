/** Typed client for the hint service; all errors map to structured classes. */

import type {
  CodeHintPayload,
  HintResponse,
  SessionInfo,
  TaskDetail,
  TaskSummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

/** 422: the pipeline declined to produce a hint (reason tells why). */
export class NoHintError extends ApiError {
  constructor(readonly reason: string) {
    super(422, `no hint available: ${reason}`);
  }
}

/** 409: the hint no longer matches the editor content. */
export class StaleHintError extends ApiError {
  constructor(message: string) {
    super(409, message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class HintServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (response.status === 204) {
      return undefined as T;
    }
    if (!response.ok) {
      let detail: unknown = await response.text();
      try {
        detail = JSON.parse(detail as string).detail;
      } catch {
        // plain-text error body
      }
      if (response.status === 422 && detail && typeof detail === "object") {
        throw new NoHintError((detail as { reason: string }).reason);
      }
      if (response.status === 409) {
        throw new StaleHintError(String(detail));
      }
      throw new ApiError(response.status, String(detail));
    }
    return (await response.json()) as T;
  }

  listTasks(): Promise<TaskSummary[]> {
    return this.request("/tasks");
  }

  getTask(taskId: string): Promise<TaskDetail> {
    return this.request(`/tasks/${taskId}`);
  }

  createSession(
    taskId: string,
    code?: string,
  ): Promise<{ sessionId: string; starterCode: string }> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ taskId, code }),
    });
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return this.request(`/sessions/${sessionId}`);
  }

  updateCode(sessionId: string, code: string): Promise<void> {
    return this.request(`/sessions/${sessionId}/code`, {
      method: "PUT",
      body: JSON.stringify({ code }),
    });
  }

  requestHint(sessionId: string, testErrors?: string): Promise<HintResponse> {
    return this.request(`/sessions/${sessionId}/hint`, {
      method: "POST",
      body: JSON.stringify({ testErrors: testErrors ?? null }),
    });
  }

  regenerateHint(sessionId: string): Promise<HintResponse> {
    return this.request(`/sessions/${sessionId}/hint/regenerate`, {
      method: "POST",
      body: JSON.stringify({}),
    });
  }

  fetchCodeHint(sessionId: string, hintId: string): Promise<CodeHintPayload> {
    return this.request(`/sessions/${sessionId}/hints/${hintId}/code`);
  }

  acceptHint(sessionId: string, hintId: string): Promise<{ code: string }> {
    return this.request(`/sessions/${sessionId}/hints/${hintId}/accept`, {
      method: "POST",
    });
  }

  cancelHint(sessionId: string, hintId: string): Promise<void> {
    return this.request(`/sessions/${sessionId}/hints/${hintId}/cancel`, {
      method: "POST",
    });
  }
}
