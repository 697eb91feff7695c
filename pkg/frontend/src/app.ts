/** DOM shell: task panel on the left, editor with line highlighting on the
 * right, and a modal code-diff window. All state transitions go through the
 * PlaygroundStore; this layer only renders and forwards events. */

import { HintServiceClient } from "./api.js";
import { PlaygroundStore, type UiState } from "./state.js";
import type { TaskSummary } from "./types.js";

const LINE_HEIGHT = 21; // px, must match .editor-wrap line-height

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Differing line ranges (0-based, end exclusive) after trimming the common
 * prefix and suffix; used to tint the two diff panes. */
export function changedLineRanges(
  before: string,
  after: string,
): { before: [number, number]; after: [number, number] } {
  const a = before.split("\n");
  const b = after.split("\n");
  let start = 0;
  while (start < a.length && start < b.length && a[start] === b[start]) {
    start += 1;
  }
  let endA = a.length;
  let endB = b.length;
  while (endA > start && endB > start && a[endA - 1] === b[endB - 1]) {
    endA -= 1;
    endB -= 1;
  }
  return { before: [start, endA], after: [start, endB] };
}

export class App {
  private store: PlaygroundStore;
  private tasks: TaskSummary[] = [];
  private root: HTMLElement;

  private taskSelect!: HTMLSelectElement;
  private taskPanel!: HTMLElement;
  private hintPanel!: HTMLElement;
  private bannerBox!: HTMLElement;
  private editor!: HTMLTextAreaElement;
  private highlightLayer!: HTMLElement;
  private diffModal!: HTMLElement;
  private hintButton!: HTMLButtonElement;

  constructor(root: HTMLElement, client: HintServiceClient) {
    this.root = root;
    this.store = new PlaygroundStore(client);
    this.buildSkeleton();
    this.store.subscribe((state) => this.render(state));
  }

  async start(client: HintServiceClient): Promise<void> {
    this.tasks = await client.listTasks();
    this.taskSelect.innerHTML = this.tasks
      .map(
        (t) =>
          `<option value="${escapeHtml(t.id)}">${escapeHtml(t.project)} / ${escapeHtml(t.title)}</option>`,
      )
      .join("");
    if (this.tasks.length > 0) {
      await this.store.openSession(this.tasks[0].id);
    }
  }

  private buildSkeleton(): void {
    this.root.innerHTML = `
      <header class="topbar">
        <span class="brand">stepwise playground</span>
        <select id="task-select"></select>
      </header>
      <main class="layout">
        <section class="task-pane">
          <div id="task-panel"></div>
          <div class="hint-controls">
            <button id="get-hint" class="primary">Get Hint</button>
          </div>
          <div id="banner"></div>
          <div id="hint-panel"></div>
        </section>
        <section class="editor-pane">
          <div class="editor-wrap">
            <div id="highlight-layer" class="highlight-layer"></div>
            <textarea id="editor" spellcheck="false"></textarea>
          </div>
        </section>
      </main>
      <div id="diff-modal" class="modal hidden"></div>
    `;
    this.taskSelect = this.root.querySelector("#task-select")!;
    this.taskPanel = this.root.querySelector("#task-panel")!;
    this.hintPanel = this.root.querySelector("#hint-panel")!;
    this.bannerBox = this.root.querySelector("#banner")!;
    this.editor = this.root.querySelector("#editor")!;
    this.highlightLayer = this.root.querySelector("#highlight-layer")!;
    this.diffModal = this.root.querySelector("#diff-modal")!;
    this.hintButton = this.root.querySelector("#get-hint")!;

    this.taskSelect.addEventListener("change", () => {
      void this.store.openSession(this.taskSelect.value);
    });
    this.hintButton.addEventListener("click", () => {
      void this.store.requestHint();
    });
    this.editor.addEventListener("input", () => {
      this.store.editCode(this.editor.value);
    });
  }

  private render(state: UiState): void {
    this.renderTask(state);
    this.renderBanner(state);
    this.renderHint(state);
    this.renderEditor(state);
    this.renderDiff(state);
    this.hintButton.disabled = state.busy || state.sessionId === null;
  }

  private renderTask(state: UiState): void {
    if (!state.task) {
      this.taskPanel.innerHTML = "<p>Loading…</p>";
      return;
    }
    const hints = state.task.predefinedHints
      .map((h) => `<li>${escapeHtml(h)}</li>`)
      .join("");
    this.taskPanel.innerHTML = `
      <h2>${escapeHtml(state.task.title)}</h2>
      <pre class="description">${escapeHtml(state.task.description)}</pre>
      ${hints ? `<h3>Hints from the author</h3><ul>${hints}</ul>` : ""}
    `;
  }

  private renderBanner(state: UiState): void {
    if (!state.banner) {
      this.bannerBox.innerHTML = "";
      return;
    }
    this.bannerBox.innerHTML = `
      <div class="banner banner-${state.banner.kind}">
        ${escapeHtml(state.banner.message)}
        <button id="banner-close">×</button>
      </div>
    `;
    this.bannerBox
      .querySelector("#banner-close")!
      .addEventListener("click", () => this.store.dismissBanner());
  }

  private renderHint(state: UiState): void {
    if (!state.pendingHint) {
      this.hintPanel.innerHTML = "";
      return;
    }
    const hint = state.pendingHint;
    this.hintPanel.innerHTML = `
      <div class="hint-box">
        <p>${escapeHtml(hint.text)}</p>
        <p class="hint-lines">Look at lines ${hint.highlight.startLine}–${hint.highlight.endLine}.</p>
        <button id="show-in-code">Show in code</button>
        <button id="regenerate">Regenerate</button>
      </div>
    `;
    this.hintPanel
      .querySelector("#show-in-code")!
      .addEventListener("click", () => void this.store.showInCode());
    this.hintPanel
      .querySelector("#regenerate")!
      .addEventListener("click", () => void this.store.regenerate());
  }

  private renderEditor(state: UiState): void {
    if (this.editor.value !== state.code && !state.codeDirty) {
      this.editor.value = state.code;
    }
    if (state.pendingHint) {
      const { startLine, endLine } = state.pendingHint.highlight;
      const top = (startLine - 1) * LINE_HEIGHT;
      const height = (endLine - startLine + 1) * LINE_HEIGHT;
      this.highlightLayer.innerHTML = `<div class="highlight-band" style="top:${top}px;height:${height}px"></div>`;
    } else {
      this.highlightLayer.innerHTML = "";
    }
  }

  private renderDiff(state: UiState): void {
    if (!state.diffView) {
      this.diffModal.classList.add("hidden");
      this.diffModal.innerHTML = "";
      return;
    }
    const { before, after, provenance } = state.diffView;
    const ranges = changedLineRanges(before, after);
    const pane = (text: string, range: [number, number]) =>
      text
        .split("\n")
        .map((line, i) => {
          const marked = i >= range[0] && i < range[1];
          return `<div class="diff-line${marked ? " diff-changed" : ""}">${escapeHtml(line) || "&nbsp;"}</div>`;
        })
        .join("");
    this.diffModal.innerHTML = `
      <div class="diff-dialog">
        <h3>Suggested change <span class="provenance">(${escapeHtml(provenance)})</span></h3>
        <div class="diff-panes">
          <div class="diff-pane"><h4>Your code</h4>${pane(before, ranges.before)}</div>
          <div class="diff-pane"><h4>After the step</h4>${pane(after, ranges.after)}</div>
        </div>
        <div class="diff-actions">
          <button id="accept" class="primary">Accept</button>
          <button id="cancel">Cancel</button>
        </div>
      </div>
    `;
    this.diffModal.classList.remove("hidden");
    this.diffModal
      .querySelector("#accept")!
      .addEventListener("click", () => void this.store.accept());
    this.diffModal
      .querySelector("#cancel")!
      .addEventListener("click", () => void this.store.cancel());
  }
}
