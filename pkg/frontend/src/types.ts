/** Wire types mirroring the hint service's JSON API. */

export interface TaskSummary {
  id: string;
  project: string;
  title: string;
}

export interface TaskDetail extends TaskSummary {
  description: string;
  predefinedHints: string[];
}

export interface HighlightSpan {
  startLine: number;
  endLine: number;
}

export interface HintResponse {
  hintId: string;
  text: string;
  highlight: HighlightSpan;
}

export interface DiffUnit {
  kind: string;
  anchor: number[];
  construct: string;
  before: string | null;
  after: string | null;
}

export interface FunctionDiff {
  function: string;
  units: DiffUnit[];
}

export interface CodeHintPayload {
  before: string;
  after: string;
  diff: FunctionDiff[];
  provenance: string;
}

export interface SessionInfo {
  sessionId: string;
  taskId: string;
  code: string;
  attempt: number;
}
