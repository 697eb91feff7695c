"""Shared domain types: tasks, snapshots, subgoal plans, and hint bundles.

Task packs live on disk as one directory per task holding `task.md`
(description), `solution.kt` (model solution), and `meta.json` with the
exact field names `id`, `project`, `priorTasks`, `topics`,
`predefinedHints`. All types are immutable in practice: construct, then
share freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Optional

from . import astdiff, syntax as syn


@dataclass(frozen=True)
class TaskSpec:
    id: str
    description: str
    model_solution: str
    predefined_hints: tuple[str, ...]
    theory_topics: tuple[str, ...]
    project_id: str
    prior_task_ids: tuple[str, ...]

    @property
    def title(self) -> str:
        for line in self.description.splitlines():
            if line.startswith("#"):
                return line.lstrip("#").strip()
        return self.id


@dataclass(frozen=True)
class StudentSnapshot:
    task_id: str
    code: str
    test_errors: Optional[str] = None
    attempt: int = 0

    def __post_init__(self):
        if self.attempt < 0:
            raise ValueError("attempt must be non-negative")

    def with_attempt(self, attempt: int) -> "StudentSnapshot":
        return StudentSnapshot(self.task_id, self.code, self.test_errors, attempt)


class SubgoalKind(Enum):
    CODE = "code"
    NO_CODE = "no-code"


@dataclass(frozen=True)
class Subgoal:
    index: int
    text: str
    kind: SubgoalKind

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("subgoal text must be non-empty")
        if "\n" in self.text:
            raise ValueError("subgoal text must not contain line breaks")


@dataclass(frozen=True)
class SubgoalPlan:
    task_id: str
    subgoals: tuple[Subgoal, ...]
    raw_response: str

    def code_only(self) -> "SubgoalPlan":
        kept = tuple(s for s in self.subgoals if s.kind is SubgoalKind.CODE)
        return SubgoalPlan(self.task_id, kept, self.raw_response)


class HintProvenance(Enum):
    LLM_GENERATED = "LlmGenerated"
    MODEL_SOLUTION_SUBSTITUTED = "ModelSolutionSubstituted"


@dataclass(frozen=True)
class CodeHint:
    target_function: tuple[str, int]
    before: str
    after: str
    retained_unit: astdiff.ChangeUnit
    provenance: HintProvenance
    heuristic: Optional[str] = None  # which size heuristic produced the unit
    inspections_applied: tuple[str, ...] = ()


@dataclass(frozen=True)
class TextHint:
    text: str
    highlight: tuple[int, int]  # 1-based inclusive line span in the before code

    def __post_init__(self):
        if "```" in self.text:
            raise ValueError("text hint must not contain code fences")
        if self.highlight[0] < 1 or self.highlight[1] < self.highlight[0]:
            raise ValueError(f"invalid highlight span {self.highlight}")


@dataclass(frozen=True)
class HintBundle:
    hint_id: str
    session_id: str
    text_hint: TextHint
    code_hint: CodeHint
    subgoal_plan: SubgoalPlan
    created_at: str = field(compare=False, default="")

    @staticmethod
    def timestamp() -> str:
        return datetime.now(timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# Serialization (lossless round-trip for bundles and their parts)


def _unit_to_dict(unit: astdiff.ChangeUnit) -> dict:
    data = unit.to_json()
    data["function"] = list(unit.function)
    data["beforeLineSpan"] = list(unit.before_line_span) if unit.before_line_span else None
    return data


def _unit_from_dict(data: dict) -> astdiff.ChangeUnit:
    span = data.get("beforeLineSpan")
    return astdiff.ChangeUnit(
        kind=data["kind"],
        function=tuple(data["function"]),
        anchor=tuple(data["anchor"]),
        construct=data["construct"],
        before_text=data["before"],
        after_text=data["after"],
        before_line_span=tuple(span) if span else None,
    )


def bundle_to_dict(bundle: HintBundle) -> dict:
    return {
        "hintId": bundle.hint_id,
        "sessionId": bundle.session_id,
        "createdAt": bundle.created_at,
        "textHint": {
            "text": bundle.text_hint.text,
            "highlight": {
                "startLine": bundle.text_hint.highlight[0],
                "endLine": bundle.text_hint.highlight[1],
            },
        },
        "codeHint": {
            "targetFunction": list(bundle.code_hint.target_function),
            "before": bundle.code_hint.before,
            "after": bundle.code_hint.after,
            "retainedUnit": _unit_to_dict(bundle.code_hint.retained_unit),
            "provenance": bundle.code_hint.provenance.value,
            "heuristic": bundle.code_hint.heuristic,
            "inspectionsApplied": list(bundle.code_hint.inspections_applied),
        },
        "subgoalPlan": {
            "taskId": bundle.subgoal_plan.task_id,
            "subgoals": [
                {"index": s.index, "text": s.text, "kind": s.kind.value}
                for s in bundle.subgoal_plan.subgoals
            ],
            "rawResponse": bundle.subgoal_plan.raw_response,
        },
    }


def bundle_from_dict(data: dict) -> HintBundle:
    text = data["textHint"]
    code = data["codeHint"]
    plan = data["subgoalPlan"]
    return HintBundle(
        hint_id=data["hintId"],
        session_id=data["sessionId"],
        created_at=data["createdAt"],
        text_hint=TextHint(
            text=text["text"],
            highlight=(text["highlight"]["startLine"], text["highlight"]["endLine"]),
        ),
        code_hint=CodeHint(
            target_function=tuple(code["targetFunction"]),
            before=code["before"],
            after=code["after"],
            retained_unit=_unit_from_dict(code["retainedUnit"]),
            provenance=HintProvenance(code["provenance"]),
            heuristic=code["heuristic"],
            inspections_applied=tuple(code["inspectionsApplied"]),
        ),
        subgoal_plan=SubgoalPlan(
            task_id=plan["taskId"],
            subgoals=tuple(
                Subgoal(s["index"], s["text"], SubgoalKind(s["kind"]))
                for s in plan["subgoals"]
            ),
            raw_response=plan["rawResponse"],
        ),
    )


# ---------------------------------------------------------------------------
# Task packs


class TaskPackError(ValueError):
    pass


@dataclass
class ValidationIssue:
    task_id: str
    kind: str  # duplicate-id | dangling-prior | parse-error | missing-topics
    message: str


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def for_task(self, task_id: str) -> list[ValidationIssue]:
        return [i for i in self.issues if i.task_id == task_id]


def load_task_pack(root: str | Path) -> list[TaskSpec]:
    """Load every task directory (identified by meta.json) under `root`."""
    root = Path(root)
    if not root.is_dir():
        raise TaskPackError(f"task pack directory not found: {root}")
    tasks = []
    for meta_path in sorted(root.rglob("meta.json")):
        task_dir = meta_path.parent
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        description = (task_dir / "task.md").read_text(encoding="utf-8")
        solution = (task_dir / "solution.kt").read_text(encoding="utf-8")
        tasks.append(TaskSpec(
            id=meta["id"],
            description=description,
            model_solution=solution,
            predefined_hints=tuple(meta.get("predefinedHints", [])),
            theory_topics=tuple(meta.get("topics", [])),
            project_id=meta["project"],
            prior_task_ids=tuple(meta.get("priorTasks", [])),
        ))
    return tasks


def validate_task_pack(pack: list[TaskSpec]) -> ValidationReport:
    """Check id uniqueness, prior-task resolution, and solution parseability."""
    report = ValidationReport()
    seen: set[str] = set()
    ids = {t.id for t in pack}
    for task in pack:
        if task.id in seen:
            report.issues.append(ValidationIssue(
                task.id, "duplicate-id", f"duplicate task id {task.id!r}"))
        seen.add(task.id)
        for prior in task.prior_task_ids:
            if prior not in ids:
                report.issues.append(ValidationIssue(
                    task.id, "dangling-prior",
                    f"prior task {prior!r} does not exist"))
        try:
            syn.parse(task.model_solution)
        except syn.SubsetSyntaxError as exc:
            report.issues.append(ValidationIssue(
                task.id, "parse-error",
                f"model solution does not parse at {exc.line}:{exc.col}: {exc.message}"))
        if not task.theory_topics:
            report.issues.append(ValidationIssue(
                task.id, "missing-topics", "task lists no theory topics"))
    return report


def task_index(pack: list[TaskSpec]) -> dict[str, TaskSpec]:
    return {t.id: t for t in pack}
