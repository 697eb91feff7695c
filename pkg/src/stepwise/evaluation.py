"""Batch scoring of generated hints against the machine-computable quality
criteria: subgoal amount and labeling, hint length in words/sentences and
added/changed/deleted code lines, intersection with existing student code,
code quality (parses, inspection-clean), and the single-step check.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import astdiff, pipeline, postprocess, prompts, syntax as syn, textwork
from .gateway import FixtureMiss, Gateway, ProviderConfig, ProviderError
from .model import HintBundle, StudentSnapshot, SubgoalKind, TaskSpec, task_index


@dataclass(frozen=True)
class HintMetrics:
    subgoal_amount: int
    no_code_leak: bool
    text_words: int
    text_sentences: int
    code_added: int
    code_changed: int
    code_deleted: int
    intersection_ratio: Optional[float]
    parses: bool
    inspection_clean: bool
    single_step: bool

    FIELDS = ("subgoal_amount", "no_code_leak", "text_words", "text_sentences",
              "code_added", "code_changed", "code_deleted", "intersection_ratio",
              "parses", "inspection_clean", "single_step")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


def _diff_line_counts(changes: astdiff.ChangeSet) -> tuple[int, int, int]:
    added = changed = deleted = 0
    for unit in changes.all_units():
        if unit.before_text is None:
            added += len((unit.after_text or "").splitlines())
        elif unit.after_text is None:
            deleted += len(unit.before_text.splitlines())
        else:
            changed += max(len(unit.before_text.splitlines()),
                           len(unit.after_text.splitlines()))
    return added, changed, deleted


def _new_code_lines(changes: astdiff.ChangeSet) -> list[str]:
    lines: list[str] = []
    for unit in changes.all_units():
        if unit.after_text is not None:
            lines.extend(ln.strip() for ln in unit.after_text.splitlines()
                         if ln.strip())
    return lines


def _inspection_clean(changes: astdiff.ChangeSet) -> bool:
    for unit in changes.all_units():
        if unit.payload is None:
            continue
        if unit.kind == astdiff.HEADER_MODIFICATION:
            node = unit.payload[1] if unit.construct == "For" else unit.payload
            if unit.construct == "FunctionDecl":
                continue
        else:
            node = unit.payload
        try:
            _, hits = postprocess.run_inspections(node)
        except TypeError:
            continue
        if hits:
            return False
    return True


def score_hint(bundle: HintBundle, snapshot: StudentSnapshot) -> HintMetrics:
    """Pure scoring: equal bundles yield equal metrics."""
    hint = bundle.code_hint
    try:
        raw_plan = prompts.parse_subgoal_response(bundle.subgoal_plan.raw_response)
        subgoal_amount = len(raw_plan.subgoals)
    except prompts.MalformedResponse:
        subgoal_amount = len(bundle.subgoal_plan.subgoals)
    no_code_leak = any(s.kind is not SubgoalKind.CODE
                       for s in bundle.subgoal_plan.subgoals)

    text = bundle.text_hint.text
    words = textwork.count_words(text)
    sentences = textwork.count_sentences(text)

    try:
        before = syn.parse(hint.before)
        after = syn.parse(hint.after)
        parses = True
    except syn.SubsetSyntaxError:
        return HintMetrics(subgoal_amount, no_code_leak, words, sentences,
                           0, 0, 0, None, False, False, False)

    changes = astdiff.diff_modules(before, after)
    added, changed, deleted = _diff_line_counts(changes)

    student_lines = {ln.strip() for ln in snapshot.code.splitlines() if ln.strip()}
    new_lines = _new_code_lines(changes)
    if added + changed > 0 and new_lines:
        overlap = sum(1 for ln in new_lines if ln in student_lines)
        intersection: Optional[float] = overlap / len(new_lines)
    else:
        intersection = None

    return HintMetrics(
        subgoal_amount=subgoal_amount,
        no_code_leak=no_code_leak,
        text_words=words,
        text_sentences=sentences,
        code_added=added,
        code_changed=changed,
        code_deleted=deleted,
        intersection_ratio=intersection,
        parses=parses,
        inspection_clean=_inspection_clean(changes),
        single_step=postprocess.is_single_step(hint),
    )


# ---------------------------------------------------------------------------
# Corpus runs


@dataclass
class SnapshotResult:
    snapshot_id: str
    outcome: str  # "hint" | NoHint reason | "ProviderError"
    metrics: Optional[HintMetrics] = None
    violations: list[str] = field(default_factory=list)
    detail: str = ""


@dataclass
class EvaluationReport:
    rows: list[SnapshotResult] = field(default_factory=list)
    generated_at: str = ""

    @property
    def invariant_violations(self) -> int:
        return sum(1 for r in self.rows if r.violations)

    @property
    def missing_fingerprints(self) -> list[str]:
        return [r.detail for r in self.rows
                if r.outcome == "ProviderError" and r.detail]

    def no_hint_breakdown(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for row in self.rows:
            if row.metrics is None:
                counts[row.outcome] = counts.get(row.outcome, 0) + 1
        return counts

    def aggregates(self) -> dict[str, dict[str, float]]:
        numeric = ("subgoal_amount", "text_words", "text_sentences", "code_added",
                   "code_changed", "code_deleted", "intersection_ratio")
        out: dict[str, dict[str, float]] = {}
        for name in numeric:
            values = [getattr(r.metrics, name) for r in self.rows
                      if r.metrics is not None and getattr(r.metrics, name) is not None]
            if values:
                out[name] = {
                    "mean": round(statistics.fmean(values), 4),
                    "median": round(statistics.median(values), 4),
                }
        return out

    def to_json(self) -> dict:
        return {
            "generatedAt": self.generated_at,
            "invariantViolations": self.invariant_violations,
            "noHintBreakdown": self.no_hint_breakdown(),
            "aggregates": self.aggregates(),
            "rows": [
                {
                    "snapshot": r.snapshot_id,
                    "outcome": r.outcome,
                    "metrics": r.metrics.as_dict() if r.metrics else None,
                    "violations": r.violations,
                    "detail": r.detail,
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(("snapshot", "outcome") + HintMetrics.FIELDS)
        for row in self.rows:
            metrics = row.metrics.as_dict() if row.metrics else {}
            writer.writerow(
                [row.snapshot_id, row.outcome]
                + [_csv_value(metrics.get(name)) for name in HintMetrics.FIELDS])
        return buffer.getvalue()


def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def load_snapshots(snapshots_dir: str | Path) -> list[tuple[str, StudentSnapshot]]:
    """`{taskId}/{name}.kt` files plus optional `{name}.errors.txt`."""
    root = Path(snapshots_dir)
    out: list[tuple[str, StudentSnapshot]] = []
    if not root.is_dir():
        return out
    for task_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for code_file in sorted(task_dir.glob("*.kt")):
            errors_file = task_dir / f"{code_file.stem}.errors.txt"
            errors = errors_file.read_text("utf-8") if errors_file.exists() else None
            snapshot = StudentSnapshot(task_id=task_dir.name,
                                       code=code_file.read_text("utf-8"),
                                       test_errors=errors)
            out.append((f"{task_dir.name}/{code_file.stem}", snapshot))
    return out


def run_corpus(task_pack: list[TaskSpec],
               snapshots: list[tuple[str, StudentSnapshot]],
               config: ProviderConfig) -> EvaluationReport:
    """Generate and score a hint per snapshot; partial failures keep going."""
    report = EvaluationReport(generated_at=HintBundle.timestamp())
    tasks = task_index(task_pack)
    gateway = Gateway(config)
    for snapshot_id, snapshot in snapshots:
        task = tasks.get(snapshot.task_id)
        if task is None:
            report.rows.append(SnapshotResult(
                snapshot_id, "UnknownTask", detail=snapshot.task_id))
            continue
        try:
            outcome = pipeline.generate_hint(task, snapshot, config,
                                             gateway=gateway)
        except FixtureMiss as exc:
            report.rows.append(SnapshotResult(
                snapshot_id, "ProviderError", detail=exc.fingerprint))
            continue
        except ProviderError as exc:
            report.rows.append(SnapshotResult(
                snapshot_id, "ProviderError", detail=str(exc)))
            continue
        if outcome.bundle is None:
            report.rows.append(SnapshotResult(snapshot_id, outcome.no_hint_reason))
            continue
        metrics = score_hint(outcome.bundle, snapshot)
        violations = pipeline.check_bundle_invariants(outcome.bundle)
        if not metrics.single_step:
            violations.append("harness: not single-step")
        if not metrics.inspection_clean:
            violations.append("harness: inspection findings remain")
        if not metrics.parses:
            violations.append("harness: hint does not parse")
        report.rows.append(SnapshotResult(snapshot_id, "hint", metrics, violations))
    return report


def write_reports(report: EvaluationReport, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    csv_path = out / "report.csv"
    json_path.write_text(json.dumps(report.to_json(), indent=2) + "\n", "utf-8")
    csv_path.write_text(report.to_csv(), "utf-8")
    return json_path, csv_path
