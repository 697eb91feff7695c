"""The three-stage hint transaction: plan subgoals, generate and minimize
the code hint, then derive the textual hint from the final code.

The code hint always comes before the textual hint; the UI shows them in
the reverse order. Every outcome carries an ordered diagnostics log naming
prompt fingerprints, retries, the size heuristic that fired, and inspection
hits, so replayed runs are fully auditable.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from typing import Optional

from . import postprocess, prompts, syntax as syn
from .gateway import Gateway, ProviderConfig
from .model import HintBundle, StudentSnapshot, TaskSpec

LANGUAGE_NAME = "Kotlin"

NO_HINT_SYNTAX_ERROR = "SyntaxError"
NO_HINT_PROVIDER_FORMAT = "ProviderFormat"
NO_HINT_ALREADY_CONVERGED = "AlreadyConverged"
NO_HINT_UNREDUCIBLE = "UnreducibleChange"
NO_HINT_INVARIANT = "InvariantViolation"


@dataclass
class PipelineOutcome:
    bundle: Optional[HintBundle] = None
    no_hint_reason: Optional[str] = None
    diagnostics: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.bundle is not None

    def log(self, event: str, detail: str = "") -> None:
        self.diagnostics.append((event, detail))


def _ask(gateway: Gateway, request: prompts.PromptRequest, outcome: PipelineOutcome,
         parse, namespace: str):
    """complete + parse with one format-reminder re-ask on malformed output."""
    outcome.log("prompt", f"{request.stage}:{request.fingerprint}")
    response = gateway.complete(request, namespace=namespace)
    try:
        return parse(response)
    except prompts.MalformedResponse as exc:
        outcome.log("malformed", str(exc))
        retry = prompts.with_format_reminder(request)
        outcome.log("re-ask", f"{retry.stage}:{retry.fingerprint}")
        response = gateway.complete(retry, namespace=namespace)
        return parse(response)


def generate_hint(task: TaskSpec, snapshot: StudentSnapshot,
                  config: ProviderConfig, session_id: str = "",
                  gateway: Optional[Gateway] = None) -> PipelineOutcome:
    """Run the full three-stage transaction for one snapshot."""
    outcome = PipelineOutcome()
    gateway = gateway or Gateway(config)
    namespace = task.id

    try:
        student = syn.parse(snapshot.code)
    except syn.SubsetSyntaxError as exc:
        outcome.no_hint_reason = NO_HINT_SYNTAX_ERROR
        outcome.log("syntax-error", str(exc))
        return outcome

    model = syn.parse(task.model_solution)
    scope = postprocess.compute_scope(student, model)
    if scope.is_empty():
        outcome.no_hint_reason = NO_HINT_ALREADY_CONVERGED
        outcome.log("scope", "empty (solution already matches the goal)")
        return outcome

    try:
        # stage 1: subgoals
        outcome.log("stage", prompts.STAGE_SUBGOALS)
        subgoal_request = prompts.build_subgoal_prompt(
            task, student, LANGUAGE_NAME, attempt=snapshot.attempt)
        plan = _ask(gateway, subgoal_request, outcome,
                    lambda text: prompts.parse_subgoal_response(text, task.id),
                    namespace)
        filtered_plan = plan.code_only()
        outcome.log("subgoals",
                    f"{len(plan.subgoals)} parsed, {len(filtered_plan.subgoals)} code")

        # stage 2: code hint
        outcome.log("stage", prompts.STAGE_CODE_HINT)
        code_request = prompts.build_code_hint_prompt(
            filtered_plan, student, snapshot.test_errors, attempt=snapshot.attempt)

        def parse_code(text: str):
            module, warnings = prompts.parse_code_response(text)
            for w in warnings:
                outcome.log("warning", w)
            return module

        llm_module = _ask(gateway, code_request, outcome, parse_code, namespace)
        code_hint = postprocess.build_code_hint(snapshot.code, llm_module, model)
        outcome.log("heuristic", code_hint.heuristic or "None")
        if code_hint.inspections_applied:
            outcome.log("inspections", ", ".join(code_hint.inspections_applied))

        # stage 3: textual hint
        outcome.log("stage", prompts.STAGE_TEXT_HINT)
        text_request = prompts.build_text_hint_prompt(
            student, code_hint, attempt=snapshot.attempt)
        text_hint = _ask(gateway, text_request, outcome,
                         lambda text: prompts.parse_text_response(text, code_hint),
                         namespace)
    except prompts.MalformedResponse as exc:
        outcome.no_hint_reason = NO_HINT_PROVIDER_FORMAT
        outcome.log("provider-format", str(exc))
        return outcome
    except postprocess.NoActionableChange as exc:
        outcome.no_hint_reason = exc.reason
        outcome.log("no-actionable-change", exc.reason)
        return outcome

    bundle = HintBundle(
        hint_id=uuid.uuid4().hex,
        session_id=session_id,
        text_hint=text_hint,
        code_hint=code_hint,
        subgoal_plan=filtered_plan,
        created_at=HintBundle.timestamp(),
    )

    violations = check_bundle_invariants(bundle)
    if violations:
        outcome.no_hint_reason = NO_HINT_INVARIANT
        outcome.log("invariant-violation", "; ".join(violations))
        return outcome

    outcome.bundle = bundle
    outcome.log("emitted", bundle.hint_id)
    return outcome


def regenerate_hint(task: TaskSpec, snapshot: StudentSnapshot,
                    config: ProviderConfig, session_id: str = "",
                    gateway: Optional[Gateway] = None) -> PipelineOutcome:
    """Same transaction with the attempt counter bumped: new fingerprints,
    hence potentially different provider output from the same code state."""
    bumped = snapshot.with_attempt(snapshot.attempt + 1)
    return generate_hint(task, bumped, config, session_id=session_id,
                         gateway=gateway)


def check_bundle_invariants(bundle: HintBundle) -> list[str]:
    """The pipeline's final gate; a non-empty result blocks emission."""
    violations: list[str] = []
    hint = bundle.code_hint
    try:
        syn.parse(hint.after)
    except syn.SubsetSyntaxError as exc:
        violations.append(f"after does not parse: {exc}")
        return violations
    if not postprocess.is_single_step(hint):
        violations.append("hint is not a single step")
    if postprocess.region_has_comments(hint):
        violations.append("changed region contains comments")
    from .model import SubgoalKind

    if any(s.kind is not SubgoalKind.CODE for s in bundle.subgoal_plan.subgoals):
        violations.append("filtered plan contains no-code subgoals")
    line_count = len(hint.before.splitlines())
    start, end = bundle.text_hint.highlight
    if not (1 <= start <= end <= line_count + 1):
        violations.append(f"highlight {bundle.text_hint.highlight} out of bounds")
    return violations
