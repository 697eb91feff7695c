/** Playground state machine, kept free of DOM concerns so it can be driven
 * headlessly in tests and by the real service alike.
 *
 * Invariants: the diff view opens only while a hint is pending; accepting
 * clears both hint and diff; cancelling closes the diff but keeps the
 * textual hint visible next to the button. At most one request is in
 * flight per session (busy flag).
 */

import {
  HintServiceClient,
  NoHintError,
  StaleHintError,
  ApiError,
} from "./api.js";
import type { CodeHintPayload, HintResponse, TaskDetail } from "./types.js";

export interface Banner {
  kind: "info" | "error" | "stale";
  message: string;
}

export interface UiState {
  task: TaskDetail | null;
  sessionId: string | null;
  code: string;
  codeDirty: boolean;
  pendingHint: HintResponse | null;
  diffView: CodeHintPayload | null;
  attempt: number;
  busy: boolean;
  banner: Banner | null;
}

const NO_HINT_MESSAGES: Record<string, string> = {
  AlreadyConverged: "No hint available: your code already matches the goal.",
  SyntaxError: "No hint available: fix the syntax error first.",
  ProviderFormat: "The tutor answered in an unusable format. Try again.",
};

type Listener = (state: UiState) => void;

export class PlaygroundStore {
  private state: UiState = {
    task: null,
    sessionId: null,
    code: "",
    codeDirty: false,
    pendingHint: null,
    diffView: null,
    attempt: 0,
    busy: false,
    banner: null,
  };

  private listeners: Listener[] = [];

  constructor(private readonly client: HintServiceClient) {}

  get current(): UiState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<UiState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  // ── session lifecycle ────────────────────────────────────────────────

  async openSession(taskId: string, code = ""): Promise<void> {
    const task = await this.client.getTask(taskId);
    const created = await this.client.createSession(taskId, code);
    this.update({
      task,
      sessionId: created.sessionId,
      code: created.starterCode,
      codeDirty: false,
      pendingHint: null,
      diffView: null,
      attempt: 0,
      banner: null,
    });
  }

  /** Rebuild state from the server (page reload). */
  async resumeSession(sessionId: string): Promise<void> {
    const info = await this.client.getSession(sessionId);
    const task = await this.client.getTask(info.taskId);
    this.update({
      task,
      sessionId,
      code: info.code,
      codeDirty: false,
      pendingHint: null,
      diffView: null,
      attempt: info.attempt,
      banner: null,
    });
  }

  /** Local editor change; synced to the server before the next hint. */
  editCode(code: string): void {
    this.update({ code, codeDirty: true, banner: null });
  }

  private async syncCode(): Promise<void> {
    if (this.state.codeDirty && this.state.sessionId) {
      await this.client.updateCode(this.state.sessionId, this.state.code);
      this.update({ codeDirty: false, attempt: 0, pendingHint: null, diffView: null });
    }
  }

  // ── hint flow ────────────────────────────────────────────────────────

  private guard(): boolean {
    return !this.state.busy && this.state.sessionId !== null;
  }

  async requestHint(testErrors?: string): Promise<void> {
    if (!this.guard()) return;
    this.update({ busy: true, banner: null });
    try {
      await this.syncCode();
      const hint = await this.client.requestHint(this.state.sessionId!, testErrors);
      this.update({ pendingHint: hint, diffView: null });
    } catch (error) {
      this.handleError(error);
    } finally {
      this.update({ busy: false });
    }
  }

  async regenerate(): Promise<void> {
    if (!this.guard() || !this.state.pendingHint) return;
    this.update({ busy: true, banner: null });
    try {
      const hint = await this.client.regenerateHint(this.state.sessionId!);
      this.update({ pendingHint: hint, diffView: null, attempt: this.state.attempt + 1 });
    } catch (error) {
      this.handleError(error);
    } finally {
      this.update({ busy: false });
    }
  }

  async showInCode(): Promise<void> {
    if (!this.guard() || !this.state.pendingHint) return;
    this.update({ busy: true });
    try {
      const payload = await this.client.fetchCodeHint(
        this.state.sessionId!,
        this.state.pendingHint.hintId,
      );
      this.update({ diffView: payload });
    } catch (error) {
      this.handleError(error);
    } finally {
      this.update({ busy: false });
    }
  }

  async accept(): Promise<void> {
    if (!this.guard() || !this.state.pendingHint || !this.state.diffView) return;
    this.update({ busy: true });
    try {
      const result = await this.client.acceptHint(
        this.state.sessionId!,
        this.state.pendingHint.hintId,
      );
      this.update({
        code: result.code,
        codeDirty: false,
        pendingHint: null,
        diffView: null,
        attempt: 0,
      });
    } catch (error) {
      this.handleError(error);
    } finally {
      this.update({ busy: false });
    }
  }

  async cancel(): Promise<void> {
    if (!this.guard() || !this.state.pendingHint || !this.state.diffView) return;
    this.update({ busy: true });
    try {
      await this.client.cancelHint(
        this.state.sessionId!,
        this.state.pendingHint.hintId,
      );
      this.update({ diffView: null });
    } catch (error) {
      this.handleError(error);
    } finally {
      this.update({ busy: false });
    }
  }

  dismissBanner(): void {
    this.update({ banner: null });
  }

  private handleError(error: unknown): void {
    if (error instanceof NoHintError) {
      const message =
        NO_HINT_MESSAGES[error.reason] ?? `No hint available: ${error.reason}.`;
      this.update({ banner: { kind: "info", message } });
    } else if (error instanceof StaleHintError) {
      this.update({
        banner: {
          kind: "stale",
          message: "Your code changed since this hint; request a new one.",
        },
        pendingHint: null,
        diffView: null,
      });
    } else if (error instanceof ApiError && error.status === 502) {
      this.update({
        banner: {
          kind: "error",
          message: "The tutor service is unreachable. Retry in a moment.",
        },
      });
    } else {
      this.update({
        banner: { kind: "error", message: `Unexpected error: ${String(error)}` },
      });
    }
  }
}
