"""Prompt construction and response parsing for the three pipeline stages.

Templates are frozen text assets; changing one changes every fingerprint
and therefore invalidates recorded fixtures by design. The fingerprint is
the lowercase hex of sha256 over (template version, stage, rendered text,
attempt).
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from . import syntax as syn, textwork
from .model import Subgoal, SubgoalKind, SubgoalPlan, TaskSpec, TextHint
from .model import CodeHint

TEMPLATE_VERSION = "1"

STAGE_SUBGOALS = "Subgoals"
STAGE_CODE_HINT = "CodeHint"
STAGE_TEXT_HINT = "TextHint"

_FORMAT_REMINDER = (
    "Your previous response did not follow the required format. "
    "Follow the format instructions exactly this time."
)


class MalformedResponse(ValueError):
    """The provider's response does not follow the required format."""


class UnparseableHintCode(MalformedResponse):
    """The extracted code block does not parse under the subset grammar."""


class EmptyResponse(MalformedResponse):
    """The provider's response contains no usable text."""


@dataclass(frozen=True)
class PromptRequest:
    stage: str
    rendered_text: str
    fingerprint: str
    attempt: int = 0


def _fingerprint(stage: str, rendered: str, attempt: int) -> str:
    payload = "\x00".join((TEMPLATE_VERSION, stage, rendered, str(attempt)))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _make_request(stage: str, rendered: str, attempt: int) -> PromptRequest:
    return PromptRequest(stage=stage, rendered_text=rendered,
                         fingerprint=_fingerprint(stage, rendered, attempt),
                         attempt=attempt)


def with_format_reminder(request: PromptRequest) -> PromptRequest:
    """The single re-ask variant of a prompt; distinct fingerprint."""
    rendered = f"{request.rendered_text}\n\n{_FORMAT_REMINDER}"
    return _make_request(request.stage, rendered, request.attempt)


def _template(name: str) -> str:
    return resources.files("stepwise.templates").joinpath(name).read_text("utf-8")


_MARKER_RE = re.compile(r"\{\{(\w+)\}\}")


def _render(template: str, values: dict[str, str]) -> str:
    def sub(match: re.Match) -> str:
        return values[match.group(1)]

    return _MARKER_RE.sub(sub, template)


def _lines_or_none(items) -> str:
    items = [i for i in items if i]
    return "\n".join(f"- {item}" for item in items) if items else "(none)"


def _block_or(text: str, placeholder: str) -> str:
    return text if text.strip() else placeholder


# ---------------------------------------------------------------------------
# Stage 1: subgoals


def build_subgoal_prompt(task: TaskSpec, student: syn.SourceModule,
                         language_name: str, attempt: int = 0) -> PromptRequest:
    model = syn.parse(task.model_solution)
    rendered = _render(_template("subgoals.txt"), {
        "LANGUAGE": language_name,
        "TASK_DESCRIPTION": task.description.strip(),
        "SIGNATURES": _lines_or_none(syn.extract_signatures(model)),
        "EXISTING_FUNCTIONS": _lines_or_none(syn.extract_signatures(student)),
        "PREDEFINED_HINTS": _lines_or_none(task.predefined_hints),
        "TOPICS": _lines_or_none(task.theory_topics),
        "LITERALS": _lines_or_none(
            f'"{lit}"' for lit in syn.extract_string_literals(model)),
        "STUDENT_CODE": _block_or(syn.print_module(student), "(empty)"),
    })
    return _make_request(STAGE_SUBGOALS, rendered, attempt)


_SUBGOAL_LINE = re.compile(r"^\s*(\d+)[.)]\s*(.*\S)\s*$")
_LABEL = re.compile(r"^(.*\S)\s*\[(code|no-code)\]$")


def parse_subgoal_response(text: str, task_id: str = "") -> SubgoalPlan:
    """Numbered `[code]`/`[no-code]` lines become subgoals, renumbered 1..n."""
    subgoals: list[Subgoal] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        numbered = _SUBGOAL_LINE.match(line)
        if not numbered:
            continue
        labeled = _LABEL.match(numbered.group(2))
        if not labeled:
            raise MalformedResponse(f"subgoal line lacks a label: {line.strip()!r}")
        kind = SubgoalKind.CODE if labeled.group(2) == "code" else SubgoalKind.NO_CODE
        subgoals.append(Subgoal(index=len(subgoals) + 1,
                                text=labeled.group(1), kind=kind))
    if not subgoals:
        raise MalformedResponse("no parseable subgoal lines in response")
    return SubgoalPlan(task_id=task_id, subgoals=tuple(subgoals), raw_response=text)


def render_plan(plan: SubgoalPlan) -> str:
    """The numbered-line format; parse_subgoal_response inverts it."""
    return "\n".join(f"{s.index}. {s.text} [{s.kind.value}]" for s in plan.subgoals)


# ---------------------------------------------------------------------------
# Stage 2: code hint


def build_code_hint_prompt(plan: SubgoalPlan, student: syn.SourceModule,
                           test_errors: Optional[str] = None,
                           attempt: int = 0) -> PromptRequest:
    rendered = _render(_template("code_hint.txt"), {
        "SUBGOALS": _block_or(render_plan(plan), "(none)"),
        "STUDENT_CODE": _block_or(syn.print_module(student), "(empty)"),
        "TEST_ERRORS": _block_or(test_errors or "", "(none)"),
    })
    return _make_request(STAGE_CODE_HINT, rendered, attempt)


_FENCED_BLOCK = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)


def parse_code_response(text: str) -> tuple[syn.SourceModule, list[str]]:
    """Extract the single code block (fenced or raw) and parse it.

    Returns the parsed module and any warnings (e.g. extra blocks ignored).
    """
    warnings: list[str] = []
    blocks = _FENCED_BLOCK.findall(text)
    if blocks:
        code = blocks[0]
        if len(blocks) > 1:
            warnings.append(f"{len(blocks)} fenced blocks in response; using the first")
    else:
        code = text
    if not code.strip():
        raise MalformedResponse("no code found in response")
    try:
        return syn.parse(code), warnings
    except syn.SubsetSyntaxError as exc:
        raise UnparseableHintCode(f"generated code does not parse: {exc}") from exc


# ---------------------------------------------------------------------------
# Stage 3: textual hint


def build_text_hint_prompt(student: syn.SourceModule, improved: CodeHint,
                           attempt: int = 0) -> PromptRequest:
    rendered = _render(_template("text_hint.txt"), {
        "STUDENT_CODE": _block_or(syn.print_module(student), "(empty)"),
        "IMPROVED_CODE": _block_or(improved.after, "(empty)"),
    })
    return _make_request(STAGE_TEXT_HINT, rendered, attempt)


def highlight_span(code_hint: CodeHint) -> tuple[int, int]:
    """The retained change's line span mapped into `before` coordinates."""
    line_count = len(code_hint.before.splitlines())
    span = code_hint.retained_unit.before_line_span or (line_count + 1, line_count + 1)
    start = max(1, min(span[0], line_count + 1))
    end = max(start, min(span[1], line_count + 1))
    return (start, end)


def parse_text_response(text: str, code_hint: CodeHint) -> TextHint:
    """Clean the provider text down to at most three imperative sentences."""
    cleaned = textwork.strip_code_fences(text)
    cleaned = " ".join(cleaned.split())
    sentences = textwork.split_sentences(cleaned)
    if not sentences:
        raise EmptyResponse("text hint response is empty")
    return TextHint(text=" ".join(sentences[:3]), highlight=highlight_span(code_hint))
