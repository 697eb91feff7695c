"""A deterministic stand-in provider used to record replay fixtures.

Given the (task, snapshot) context it produces plausible tutor responses:
subgoal plans mixing code and no-code steps, "generated" code that solves
every in-scope function at once (so the size heuristics have work to do),
gratuitous edits to out-of-scope functions (so scope filtering has work to
do), comparison chains instead of ranges (so inspections have work to do),
and procedural comments (so comment stripping has work to do).
"""

from __future__ import annotations

import copy

from stepwise import astdiff, postprocess, prompts, syntax as syn
from stepwise.model import StudentSnapshot, TaskSpec


def _chainify_expr(expr):
    """Rewrite `x in a..b` into `x >= a && x <= b` (the LLM's bad habit)."""
    if expr is None:
        return None
    if isinstance(expr, syn.Binary):
        expr.left = _chainify_expr(expr.left)
        expr.right = _chainify_expr(expr.right)
        if expr.op == "in" and isinstance(expr.right, syn.RangeExpr):
            return syn.Binary(
                op="&&",
                left=syn.Binary(op=">=", left=expr.left, right=expr.right.low),
                right=syn.Binary(op="<=", left=copy.deepcopy(expr.left),
                                 right=expr.right.high),
            )
    elif isinstance(expr, syn.Unary):
        expr.operand = _chainify_expr(expr.operand)
    elif isinstance(expr, syn.Call):
        expr.receiver = _chainify_expr(expr.receiver)
        expr.args = [_chainify_expr(a) for a in expr.args]
    elif isinstance(expr, syn.RangeExpr):
        expr.low = _chainify_expr(expr.low)
        expr.high = _chainify_expr(expr.high)
    return expr


def _chainify_stmt(stmt) -> None:
    if isinstance(stmt, syn.VarDecl):
        stmt.value = _chainify_expr(stmt.value)
    elif isinstance(stmt, syn.Assign):
        stmt.value = _chainify_expr(stmt.value)
    elif isinstance(stmt, syn.ExprStmt):
        stmt.expr = _chainify_expr(stmt.expr)
    elif isinstance(stmt, syn.ReturnStmt):
        stmt.value = _chainify_expr(stmt.value)
    elif isinstance(stmt, syn.IfStmt):
        stmt.condition = _chainify_expr(stmt.condition)
        _chainify_block(stmt.then_block)
        if stmt.else_block is not None:
            _chainify_block(stmt.else_block)
    elif isinstance(stmt, syn.WhenStmt):
        stmt.subject = _chainify_expr(stmt.subject)
        for br in stmt.branches:
            _chainify_block(br.body)
    elif isinstance(stmt, syn.ForStmt):
        _chainify_block(stmt.body)
    elif isinstance(stmt, syn.WhileStmt):
        stmt.condition = _chainify_expr(stmt.condition)
        _chainify_block(stmt.body)
    elif isinstance(stmt, syn.DoWhileStmt):
        _chainify_block(stmt.body)
        stmt.condition = _chainify_expr(stmt.condition)


def _chainify_block(block: syn.Block) -> None:
    for st in block.statements:
        _chainify_stmt(st)


def _comment(text: str) -> syn.Comment:
    return syn.Comment(text, 0, 0, 0, 0)


def _tweak_out_of_scope(fn: syn.FunctionDecl) -> bool:
    """A gratuitous 'refactor' of an already-correct function."""
    body = fn.body.statements
    if len(body) == 1 and isinstance(body[0], syn.ReturnStmt) and body[0].value:
        value = body[0].value
        fn.body.statements = [
            syn.VarDecl(mutable=False, name="result", value=value),
            syn.ReturnStmt(value=syn.NameRef(name="result")),
        ]
        return True
    return False


def synthesize_llm_module(student: syn.SourceModule,
                          model: syn.SourceModule) -> syn.SourceModule:
    """The tutor's 'generated code': every in-scope function solved at once,
    ranges written as comparison chains, procedural comments sprinkled in,
    and out-of-scope functions gratuitously refactored."""
    scope = postprocess.compute_scope(student, model)
    result = copy.deepcopy(student)
    step = 1
    for i, fn in enumerate(result.functions):
        if fn.key in scope.functions_to_change:
            solved = copy.deepcopy(model.function(*fn.key))
            _chainify_block(solved.body)
            if solved.body.statements:
                solved.body.statements[0].leading.append(
                    _comment(f"// Step {step}: rework {fn.name}"))
            result.functions[i] = solved
            step += 1
        elif model.function(*fn.key) is not None:
            _tweak_out_of_scope(result.functions[i])
    for key in sorted(scope.functions_to_add):
        solved = copy.deepcopy(model.function(*key))
        if solved is None:
            continue
        _chainify_block(solved.body)
        solved.leading.append(_comment(f"// Step {step}: add {key[0]}"))
        result.functions.append(solved)
        step += 1
    if astdiff.SCRIPT_KEY in scope.allowed:
        result.top_level_statements = copy.deepcopy(model.top_level_statements)
    return result


class FakeTutor:
    """Callable transport: PromptRequest -> response text."""

    def __init__(self):
        self.context: tuple[TaskSpec, StudentSnapshot] | None = None
        self.calls = 0

    def for_snapshot(self, task: TaskSpec, snapshot: StudentSnapshot) -> "FakeTutor":
        self.context = (task, snapshot)
        return self

    def __call__(self, request: prompts.PromptRequest) -> str:
        self.calls += 1
        task, snapshot = self.context
        if request.stage == prompts.STAGE_SUBGOALS:
            return self._subgoals(task, snapshot, request)
        if request.stage == prompts.STAGE_CODE_HINT:
            return self._code(task, snapshot, request)
        return self._text(request)

    # stage 1

    def _subgoals(self, task: TaskSpec, snapshot: StudentSnapshot,
                  request: prompts.PromptRequest) -> str:
        student = syn.parse(snapshot.code)
        model = syn.parse(task.model_solution)
        scope = postprocess.compute_scope(student, model)
        steps: list[tuple[str, str]] = []
        steps.append(("Re-read the task statement and the expected output.",
                      "no-code"))
        for name, arity in sorted(scope.functions_to_add):
            steps.append((f"Declare the {name} function with its parameters.", "code"))
            steps.append((f"Implement the body of {name} step by step.", "code"))
        for name, arity in sorted(scope.functions_to_change):
            steps.append((f"Complete the missing logic inside {name}.", "code"))
            steps.append((f"Make {name} produce the exact expected output.", "code"))
        steps.append(("Read every input value with readln before using it.", "code"))
        steps.append(("Print the required result with println.", "code"))
        steps.append(("Run the solution and compare the output.", "no-code"))
        if request.attempt > 0:
            steps.insert(1, ("Simplify the smallest unfinished piece first.", "code"))
        while len(steps) < 6:
            steps.append(("Check the output format once more.", "no-code"))
        return "\n".join(f"{i}. {text} [{kind}]"
                         for i, (text, kind) in enumerate(steps, start=1))

    # stage 2

    def _code(self, task: TaskSpec, snapshot: StudentSnapshot,
              request: prompts.PromptRequest) -> str:
        student = syn.parse(snapshot.code)
        model = syn.parse(task.model_solution)
        code = syn.print_module(synthesize_llm_module(student, model))
        if request.attempt > 0:
            return f"Here is the improved version:\n```kotlin\n{code}```\n"
        return f"```kotlin\n{code}```"

    # stage 3

    def _text(self, request: prompts.PromptRequest) -> str:
        before_text, after_text = _split_code_sections(request.rendered_text)
        sentence = _describe_change(before_text, after_text)
        if request.attempt > 0:
            sentence = f"Try a smaller step. {sentence}"
        if request.attempt % 2 == 1:
            sentence += "\n```kotlin\nprintln(\"ignore me\")\n```"
        return sentence


def _split_code_sections(rendered: str) -> tuple[str, str]:
    middle = rendered.split("## Current student code\n", 1)[1]
    before, rest = middle.split("\n## Improved code for the next step\n", 1)
    after = rest.split("\nDescribe the single change", 1)[0]
    return before, after


def _describe_change(before_text: str, after_text: str) -> str:
    if before_text.strip() == "(empty)":
        before_text = ""
    try:
        before = syn.parse(before_text)
        after = syn.parse(after_text)
    except syn.SubsetSyntaxError:
        return "Apply the next small change to your solution."
    changes = astdiff.diff_modules(before, after)
    touched = changes.functions_with_units()
    if not touched:
        return "Keep your current solution."
    key = touched[0]
    unit = changes.units_by_function[key][0]
    name = key[0]
    if unit.kind == astdiff.ADD_CONSTRUCT and unit.construct == "FunctionDecl":
        if "TODO(" in (unit.after_text or ""):
            return f"Declare the {name} function and leave its body as a TODO for now."
        return f"Declare the {name} function and implement its short body."
    if unit.kind == astdiff.ADD_CONSTRUCT:
        kind = {"If": "an if check", "When": "a when block", "For": "a for loop",
                "While": "a while loop", "DoWhile": "a do-while loop"}[unit.construct]
        return f"Add {kind} inside {name}. Fill its body afterwards."
    if unit.kind == astdiff.HEADER_MODIFICATION:
        return f"Adjust the condition of the {unit.construct.lower()} inside {name}."
    if unit.kind == astdiff.DELETE_CONSTRUCT:
        return f"Remove the unneeded {unit.construct.lower()} from {name}."
    return f"Update the first differing statement inside {name}."
