"""Structural diffing between two subset programs.

Differences are classified into change units (added/deleted constructs,
header modifications, body-statement modifications) anchored by AST paths.
A path alternates statement indices and child-block indices, starting from
a function's body: `(2,)` is the third body statement, `(2, 0, 1)` is the
second statement of its first child block. The empty path addresses the
function itself. Top-level script statements diff under the reserved
function key `("<script>", 0)`.

Applying all units of a diff onto `before` reproduces `after` up to
structural equality; applying a subset yields a valid intermediate program.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from . import syntax as syn

ADD_CONSTRUCT = "AddConstruct"
DELETE_CONSTRUCT = "DeleteConstruct"
HEADER_MODIFICATION = "HeaderModification"
BODY_STATEMENT_MODIFICATION = "BodyStatementModification"

SCRIPT_KEY = ("<script>", 0)

FunctionKey = tuple[str, int]


class StaleUnitError(ValueError):
    """A unit no longer resolves against the module it is applied to."""

    def __init__(self, anchor: tuple[int, ...], reason: str):
        super().__init__(f"stale change unit at anchor {list(anchor)}: {reason}")
        self.anchor = anchor


@dataclass
class ChangeUnit:
    kind: str
    function: FunctionKey
    anchor: tuple[int, ...]
    construct: str
    before_text: Optional[str]
    after_text: Optional[str]
    # application internals (AST payloads and before-side coordinates)
    before_path: Optional[tuple[int, ...]] = field(default=None, repr=False)
    insert_path: Optional[tuple[int, ...]] = field(default=None, repr=False)
    after_path: Optional[tuple[int, ...]] = field(default=None, repr=False)
    payload: object = field(default=None, repr=False, compare=False)
    before_line_span: Optional[tuple[int, int]] = field(default=None, repr=False)
    order: int = field(default=0, repr=False)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "anchor": list(self.anchor),
            "construct": self.construct,
            "before": self.before_text,
            "after": self.after_text,
        }


@dataclass
class ChangeSet:
    units_by_function: dict[FunctionKey, list[ChangeUnit]] = field(default_factory=dict)
    function_order: list[FunctionKey] = field(default_factory=list)

    def all_units(self) -> list[ChangeUnit]:
        out = []
        for key in self.function_order:
            out.extend(self.units_by_function.get(key, []))
        return out

    def functions_with_units(self) -> list[FunctionKey]:
        return [k for k in self.function_order if self.units_by_function.get(k)]

    def is_empty(self) -> bool:
        return not any(self.units_by_function.values())

    def to_json(self) -> list[dict]:
        return [
            {
                "function": f"{key[0]}/{key[1]}",
                "units": [u.to_json() for u in self.units_by_function[key]],
            }
            for key in self.function_order
            if self.units_by_function.get(key)
        ]


# ---------------------------------------------------------------------------
# Alignment


def align_functions(
    before: syn.SourceModule, after: syn.SourceModule
) -> list[tuple[Optional[syn.FunctionDecl], Optional[syn.FunctionDecl]]]:
    """Pair functions by (name, arity): after source order, then deletions."""
    before_by_key = {fn.key: fn for fn in before.functions}
    after_keys = {fn.key for fn in after.functions}
    pairs: list[tuple[Optional[syn.FunctionDecl], Optional[syn.FunctionDecl]]] = []
    for fn in after.functions:
        pairs.append((before_by_key.get(fn.key), fn))
    for fn in before.functions:
        if fn.key not in after_keys:
            pairs.append((fn, None))
    return pairs


def _fingerprint(stmt: syn.Stmt) -> tuple[str, str]:
    return (type(stmt).__name__, syn.canonical_text(stmt))


def _lcs_pairs(a: list, b: list) -> list[tuple[int, int]]:
    n, m = len(a), len(b)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                dp[i][j] = dp[i + 1][j + 1] + 1
            else:
                dp[i][j] = max(dp[i + 1][j], dp[i][j + 1])
    pairs = []
    i = j = 0
    while i < n and j < m:
        if a[i] == b[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif dp[i + 1][j] >= dp[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


# ---------------------------------------------------------------------------
# Diff


class _Differ:
    def __init__(self, function: FunctionKey):
        self.function = function
        self.units: list[ChangeUnit] = []
        self._order = 0

    def emit(self, unit: ChangeUnit) -> ChangeUnit:
        unit.order = self._order
        self._order += 1
        self.units.append(unit)
        return unit

    # unit constructors

    def add_statement(self, stmt: syn.Stmt, after_path: tuple[int, ...],
                      insert_path: tuple[int, ...], line: Optional[int]) -> None:
        compound = isinstance(stmt, syn.COMPOUND_STATEMENTS)
        self.emit(ChangeUnit(
            kind=ADD_CONSTRUCT if compound else BODY_STATEMENT_MODIFICATION,
            function=self.function,
            anchor=after_path,
            construct=stmt.construct,
            before_text=None,
            after_text=syn.canonical_text(stmt),
            insert_path=insert_path,
            after_path=after_path,
            payload=copy.deepcopy(stmt),
            before_line_span=(line, line) if line is not None else None,
        ))

    def delete_statement(self, stmt: syn.Stmt, before_path: tuple[int, ...]) -> None:
        compound = isinstance(stmt, syn.COMPOUND_STATEMENTS)
        self.emit(ChangeUnit(
            kind=DELETE_CONSTRUCT if compound else BODY_STATEMENT_MODIFICATION,
            function=self.function,
            anchor=before_path,
            construct=stmt.construct,
            before_text=syn.canonical_text(stmt),
            after_text=None,
            before_path=before_path,
            before_line_span=_stmt_lines(stmt),
        ))

    def replace_statement(self, b_stmt: syn.Stmt, a_stmt: syn.Stmt,
                          before_path: tuple[int, ...],
                          after_path: tuple[int, ...]) -> None:
        self.emit(ChangeUnit(
            kind=BODY_STATEMENT_MODIFICATION,
            function=self.function,
            anchor=before_path,
            construct=a_stmt.construct,
            before_text=syn.canonical_text(b_stmt),
            after_text=syn.canonical_text(a_stmt),
            before_path=before_path,
            after_path=after_path,
            payload=copy.deepcopy(a_stmt),
            before_line_span=_stmt_lines(b_stmt),
        ))

    def header_modification(self, construct: str, before_path: tuple[int, ...],
                            before_text: str, after_text: str, payload,
                            line: Optional[int]) -> None:
        self.emit(ChangeUnit(
            kind=HEADER_MODIFICATION,
            function=self.function,
            anchor=before_path,
            construct=construct,
            before_text=before_text,
            after_text=after_text,
            before_path=before_path,
            payload=copy.deepcopy(payload),
            before_line_span=(line, line) if line is not None else None,
        ))

    # recursion

    def diff_block(self, before: syn.Block, after: syn.Block,
                   bprefix: tuple[int, ...], aprefix: tuple[int, ...]) -> None:
        b_stmts = before.statements
        a_stmts = after.statements
        b_fps = [_fingerprint(s) for s in b_stmts]
        a_fps = [_fingerprint(s) for s in a_stmts]
        matches = _lcs_pairs(b_fps, a_fps) + [(len(b_stmts), len(a_stmts))]
        bi = ai = 0
        for mb, ma in matches:
            gap_b = list(range(bi, mb))
            gap_a = list(range(ai, ma))
            for k in range(max(len(gap_b), len(gap_a))):
                has_b = k < len(gap_b)
                has_a = k < len(gap_a)
                if has_b and has_a:
                    self._modify(b_stmts[gap_b[k]], a_stmts[gap_a[k]],
                                 bprefix + (gap_b[k],), aprefix + (gap_a[k],),
                                 before)
                elif has_b:
                    self.delete_statement(b_stmts[gap_b[k]], bprefix + (gap_b[k],))
                else:
                    line = _gap_line(before, mb)
                    self.add_statement(a_stmts[gap_a[k]], aprefix + (gap_a[k],),
                                       bprefix + (mb,), line)
            bi, ai = mb + 1, ma + 1

    def _modify(self, b: syn.Stmt, a: syn.Stmt, bpath: tuple[int, ...],
                apath: tuple[int, ...], parent_block: syn.Block) -> None:
        if type(b) is type(a) and isinstance(b, syn.COMPOUND_STATEMENTS):
            if self._refine(b, a, bpath, apath):
                return
        if isinstance(a, syn.COMPOUND_STATEMENTS) or isinstance(b, syn.COMPOUND_STATEMENTS):
            if type(b) is not type(a):
                # shape change: the new statement appears, the old one goes away;
                # the addition comes first so size heuristics see it as the lead unit
                line = _stmt_lines(b)
                self.add_statement(a, apath, bpath, line[0] if line else None)
                self.delete_statement(b, bpath)
                return
            # same compound kind but unrefinable: one whole-statement unit
            self.replace_statement(b, a, bpath, apath)
            return
        self.replace_statement(b, a, bpath, apath)

    def _refine(self, b: syn.Stmt, a: syn.Stmt, bpath: tuple[int, ...],
                apath: tuple[int, ...]) -> bool:
        """Split a same-kind compound change into header/body units.

        Returns False when the construct shapes diverge (else-presence or
        when-branch layout), in which case the caller emits one whole unit.
        """
        line = b.span.start_line if b.span else None
        if isinstance(b, syn.IfStmt):
            if (b.else_block is None) != (a.else_block is None):
                return False
            if syn.canonical_text(b.condition) != syn.canonical_text(a.condition):
                self.header_modification("If", bpath,
                                         syn.canonical_text(b.condition),
                                         syn.canonical_text(a.condition),
                                         a.condition, line)
            self.diff_block(b.then_block, a.then_block, bpath + (0,), apath + (0,))
            if b.else_block is not None:
                self.diff_block(b.else_block, a.else_block, bpath + (1,), apath + (1,))
            return True
        if isinstance(b, syn.WhenStmt):
            b_conds = [None if br.condition is None else syn.canonical_text(br.condition)
                       for br in b.branches]
            a_conds = [None if br.condition is None else syn.canonical_text(br.condition)
                       for br in a.branches]
            if b_conds != a_conds:
                return False
            if syn.canonical_text(b.subject) != syn.canonical_text(a.subject):
                self.header_modification("When", bpath,
                                         syn.canonical_text(b.subject),
                                         syn.canonical_text(a.subject),
                                         a.subject, line)
            for i, (bb, ab) in enumerate(zip(b.branches, a.branches)):
                self.diff_block(bb.body, ab.body, bpath + (i,), apath + (i,))
            return True
        if isinstance(b, syn.ForStmt):
            b_header = f"{b.var_name} in {syn.canonical_text(b.iterable)}"
            a_header = f"{a.var_name} in {syn.canonical_text(a.iterable)}"
            if b_header != a_header:
                self.header_modification("For", bpath, b_header, a_header,
                                         (a.var_name, a.iterable), line)
            self.diff_block(b.body, a.body, bpath + (0,), apath + (0,))
            return True
        if isinstance(b, syn.WhileStmt):
            if syn.canonical_text(b.condition) != syn.canonical_text(a.condition):
                self.header_modification("While", bpath,
                                         syn.canonical_text(b.condition),
                                         syn.canonical_text(a.condition),
                                         a.condition, line)
            self.diff_block(b.body, a.body, bpath + (0,), apath + (0,))
            return True
        if isinstance(b, syn.DoWhileStmt):
            if syn.canonical_text(b.condition) != syn.canonical_text(a.condition):
                self.header_modification("DoWhile", bpath,
                                         syn.canonical_text(b.condition),
                                         syn.canonical_text(a.condition),
                                         a.condition, line)
            self.diff_block(b.body, a.body, bpath + (0,), apath + (0,))
            return True
        return False


def _stmt_lines(stmt: syn.Stmt) -> Optional[tuple[int, int]]:
    if stmt.span is None:
        return None
    return (stmt.span.start_line, stmt.span.end_line)


def _gap_line(block: syn.Block, gap: int) -> Optional[int]:
    stmts = block.statements
    if gap < len(stmts) and stmts[gap].span is not None:
        return stmts[gap].span.start_line
    if stmts and stmts[-1].span is not None:
        return stmts[-1].span.end_line + 1
    if block.span is not None:
        return block.span.end_line
    return None


def diff_function(before: Optional[syn.FunctionDecl],
                  after: Optional[syn.FunctionDecl]) -> list[ChangeUnit]:
    """Classified change units between two aligned function versions."""
    if before is None and after is None:
        raise ValueError("diff_function requires at least one side")
    if before is None:
        differ = _Differ(after.key)
        differ.emit(ChangeUnit(
            kind=ADD_CONSTRUCT, function=after.key, anchor=(),
            construct="FunctionDecl", before_text=None,
            after_text=syn.canonical_text(after),
            after_path=(), payload=copy.deepcopy(after),
        ))
        return differ.units
    if after is None:
        differ = _Differ(before.key)
        differ.emit(ChangeUnit(
            kind=DELETE_CONSTRUCT, function=before.key, anchor=(),
            construct="FunctionDecl", before_text=syn.canonical_text(before),
            after_text=None, before_path=(),
            before_line_span=_stmt_lines(before),
        ))
        return differ.units
    differ = _Differ(before.key)
    if before.signature() != after.signature():
        line = before.span.start_line if before.span else None
        differ.header_modification(
            "FunctionDecl", (), before.signature(), after.signature(),
            (list(after.parameters), after.return_type), line,
        )
    differ.diff_block(before.body, after.body, (), ())
    return differ.units


def diff_modules(before: syn.SourceModule, after: syn.SourceModule) -> ChangeSet:
    """Group diff_function over align_functions; scripts diff under <script>."""
    changes = ChangeSet()
    for b_fn, a_fn in align_functions(before, after):
        key = (a_fn or b_fn).key
        changes.units_by_function[key] = diff_function(b_fn, a_fn)
        changes.function_order.append(key)
    if before.top_level_statements or after.top_level_statements:
        differ = _Differ(SCRIPT_KEY)
        b_block = _script_block(before)
        a_block = _script_block(after)
        differ.diff_block(b_block, a_block, (), ())
        changes.units_by_function[SCRIPT_KEY] = differ.units
        changes.function_order.append(SCRIPT_KEY)
    return changes


def _script_block(module: syn.SourceModule) -> syn.Block:
    block = syn.Block(statements=module.top_level_statements)
    block.span = module.span
    return block


# ---------------------------------------------------------------------------
# Application


def _resolve_stmt(body: syn.Block, path: tuple[int, ...], anchor: tuple[int, ...]):
    """Walk a statement path; returns (parent_block, statement)."""
    block = body
    node = None
    i = 0
    while i < len(path):
        idx = path[i]
        if idx >= len(block.statements):
            raise StaleUnitError(anchor, f"statement index {idx} out of range")
        node = block.statements[idx]
        i += 1
        if i < len(path):
            blocks = syn.child_blocks(node)
            bidx = path[i]
            if bidx >= len(blocks):
                raise StaleUnitError(anchor, f"child block index {bidx} out of range")
            block = blocks[bidx]
            i += 1
    return block, node


def _walk_block(body: syn.Block, prefix: tuple[int, ...],
                anchor: tuple[int, ...]) -> syn.Block:
    block = body
    i = 0
    while i < len(prefix):
        idx = prefix[i]
        if idx >= len(block.statements):
            raise StaleUnitError(anchor, f"statement index {idx} out of range")
        node = block.statements[idx]
        blocks = syn.child_blocks(node)
        bidx = prefix[i + 1]
        if bidx >= len(blocks):
            raise StaleUnitError(anchor, f"child block index {bidx} out of range")
        block = blocks[bidx]
        i += 2
    return block


def _check_before_text(unit: ChangeUnit, stmt: syn.Stmt) -> None:
    if unit.before_text is not None and syn.canonical_text(stmt) != unit.before_text:
        raise StaleUnitError(unit.anchor, "statement no longer matches the diff")


def _apply_header(unit: ChangeUnit, target) -> None:
    payload = unit.payload
    if unit.construct == "FunctionDecl":
        params, return_type = payload
        target.parameters = list(params)
        target.return_type = return_type
    elif unit.construct in ("If", "While", "DoWhile"):
        if syn.canonical_text(target.condition) != unit.before_text:
            raise StaleUnitError(unit.anchor, "condition no longer matches the diff")
        target.condition = copy.deepcopy(payload)
    elif unit.construct == "When":
        if syn.canonical_text(target.subject) != unit.before_text:
            raise StaleUnitError(unit.anchor, "subject no longer matches the diff")
        target.subject = copy.deepcopy(payload)
    elif unit.construct == "For":
        var_name, iterable = payload
        target.var_name = var_name
        target.iterable = copy.deepcopy(iterable)
    else:
        raise StaleUnitError(unit.anchor, f"no header for construct {unit.construct}")


def apply_units(before: syn.SourceModule, units: list[ChangeUnit]) -> syn.SourceModule:
    """Apply a subset of a ChangeSet computed against `before`.

    Raises StaleUnitError when an anchor no longer resolves or the anchored
    statement does not match the unit's recorded before-fragment.
    """
    module = copy.deepcopy(before)
    by_function: dict[FunctionKey, list[ChangeUnit]] = {}
    for u in units:
        by_function.setdefault(u.function, []).append(u)

    for key, fn_units in by_function.items():
        whole_adds = [u for u in fn_units if u.kind == ADD_CONSTRUCT
                      and u.construct == "FunctionDecl" and u.after_path == ()]
        whole_deletes = [u for u in fn_units if u.kind == DELETE_CONSTRUCT
                         and u.construct == "FunctionDecl" and u.before_path == ()]
        rest = [u for u in fn_units if u not in whole_adds and u not in whole_deletes]

        if whole_deletes:
            fn = module.function(*key)
            if fn is None:
                raise StaleUnitError((), f"function {key[0]}/{key[1]} not found")
            module.functions.remove(fn)
            continue
        if whole_adds:
            if module.function(*key) is not None:
                raise StaleUnitError((), f"function {key[0]}/{key[1]} already exists")
            module.functions.append(copy.deepcopy(whole_adds[0].payload))
            if rest:
                raise StaleUnitError((), "units alongside a whole-function addition")
            continue

        if key == SCRIPT_KEY:
            body = syn.Block(statements=module.top_level_statements)
        else:
            fn = module.function(*key)
            if fn is None:
                raise StaleUnitError((), f"function {key[0]}/{key[1]} not found")
            body = fn.body

        replacements: list[tuple[syn.Block, syn.Stmt, syn.Stmt]] = []
        deletions: list[tuple[syn.Block, syn.Stmt]] = []
        blocks_touched: list[syn.Block] = []
        insert_ops: list[tuple[syn.Block, int, int, syn.Stmt]] = []

        for u in rest:
            if u.kind == HEADER_MODIFICATION:
                if u.before_path == ():
                    target = fn if key != SCRIPT_KEY else None
                    if target is None:
                        raise StaleUnitError(u.anchor, "script region has no header")
                else:
                    _, target = _resolve_stmt(body, u.before_path, u.anchor)
                _apply_header(u, target)
            elif u.before_path is not None and u.after_path is None:
                block, stmt = _resolve_stmt(body, u.before_path, u.anchor)
                _check_before_text(u, stmt)
                deletions.append((block, stmt))
                blocks_touched.append(block)
            elif u.before_path is not None:
                block, stmt = _resolve_stmt(body, u.before_path, u.anchor)
                _check_before_text(u, stmt)
                replacements.append((block, stmt, copy.deepcopy(u.payload)))
                blocks_touched.append(block)
            else:
                prefix, gap = u.insert_path[:-1], u.insert_path[-1]
                block = _walk_block(body, prefix, u.anchor)
                if gap > len(block.statements):
                    raise StaleUnitError(u.anchor, f"gap {gap} out of range")
                insert_ops.append((block, gap, u.order, copy.deepcopy(u.payload)))
                blocks_touched.append(block)

        delete_set = {id(s) for _, s in deletions}
        replace_map = {id(s): new for _, s, new in replacements}
        seen: set[int] = set()
        for block in blocks_touched:
            if id(block) in seen:
                continue
            seen.add(id(block))
            block_inserts = sorted(
                [(gap, order, stmt) for b, gap, order, stmt in insert_ops if b is block],
                key=lambda t: (t[0], t[1]),
            )
            rebuilt: list[syn.Stmt] = []
            for idx, st in enumerate(block.statements):
                while block_inserts and block_inserts[0][0] == idx:
                    rebuilt.append(block_inserts.pop(0)[2])
                if id(st) in delete_set:
                    continue
                rebuilt.append(replace_map.get(id(st), st))
            while block_inserts:
                rebuilt.append(block_inserts.pop(0)[2])
            block.statements[:] = rebuilt

    return module


# ---------------------------------------------------------------------------
# Textual application (keeps untouched student lines byte-identical)


def _splice(lines: list[str], span: syn.Span, replacement: str) -> list[str]:
    prefix = lines[span.start_line - 1][:span.start_col - 1]
    suffix = lines[span.end_line - 1][span.end_col:]
    rep = replacement.split("\n") if replacement else [""]
    merged = [prefix + rep[0]] + rep[1:]
    merged[-1] += suffix
    return lines[:span.start_line - 1] + merged + lines[span.end_line:]


def _indent_fragment(text: str, indent: int) -> str:
    pad = " " * indent
    parts = text.split("\n")
    return "\n".join([parts[0]] + [pad + p if p else p for p in parts[1:]])


def _line_indent(lines: list[str], line: int) -> int:
    text = lines[line - 1]
    return len(text) - len(text.lstrip(" "))


def _target_body(module: syn.SourceModule, unit: ChangeUnit):
    if unit.function == SCRIPT_KEY:
        block = syn.Block(statements=module.top_level_statements)
        block.span = module.span
        return None, block
    fn = module.function(*unit.function)
    if fn is None:
        raise StaleUnitError(unit.anchor,
                             f"function {unit.function[0]}/{unit.function[1]} not found")
    return fn, fn.body


def apply_unit_textually(source: str, module: syn.SourceModule,
                         unit: ChangeUnit) -> str:
    """Apply one unit to the original source text.

    `module` must be `parse(source)` so node spans address the text. The
    usual path splices the rendered fragment into the original lines,
    keeping everything outside the changed region byte-identical; when the
    splice cannot represent the edit (inline branch bodies and similar),
    the target function is re-printed from the AST-applied result instead.
    """
    expected = apply_units(module, [unit])
    try:
        spliced = _splice_unit(source, module, unit)
        if syn.structurally_equal(syn.parse(spliced), expected):
            return spliced
    except syn.SubsetSyntaxError:
        pass
    return _reprint_target(source, module, expected, unit)


def _reprint_target(source: str, module: syn.SourceModule,
                    expected: syn.SourceModule, unit: ChangeUnit) -> str:
    if unit.function == SCRIPT_KEY:
        return syn.print_module(expected)
    fn_before = module.function(*unit.function)
    fn_after = expected.function(*unit.function)
    if fn_before is None or fn_after is None:
        return syn.print_module(expected)
    fragment = syn.print_function(fn_after, include_comments=True)
    lines = _splice(source.split("\n"), fn_before.span, fragment)
    return "\n".join(lines)


def _splice_unit(source: str, module: syn.SourceModule,
                 unit: ChangeUnit) -> str:
    lines = source.split("\n")

    # whole-function addition appends a new declaration
    if unit.kind == ADD_CONSTRUCT and unit.construct == "FunctionDecl" \
            and unit.after_path == ():
        fragment = syn.print_function(unit.payload)
        if source.strip():
            return source.rstrip("\n") + "\n\n" + fragment + "\n"
        return fragment + "\n"

    fn, body = _target_body(module, unit)

    # whole-function deletion removes the declaration's lines
    if unit.kind == DELETE_CONSTRUCT and unit.construct == "FunctionDecl" \
            and unit.before_path == ():
        if syn.canonical_text(fn) != unit.before_text:
            raise StaleUnitError(unit.anchor, "function no longer matches the diff")
        kept = lines[:fn.span.start_line - 1] + lines[fn.span.end_line:]
        while kept and not kept[0].strip():
            kept.pop(0)
        out = "\n".join(kept)
        while "\n\n\n" in out:
            out = out.replace("\n\n\n", "\n\n")
        return out

    if unit.kind == HEADER_MODIFICATION:
        if unit.before_path == ():
            params, return_type = unit.payload
            decl = syn.FunctionDecl(name=unit.function[0], parameters=list(params),
                                    return_type=return_type)
            span = syn.Span(fn.span.start_line, fn.span.start_col,
                            fn.body.span.start_line, fn.body.span.start_col)
            return "\n".join(_splice(lines, span, f"fun {decl.signature()} {{"))
        _, target = _resolve_stmt(body, unit.before_path, unit.anchor)
        if isinstance(target, (syn.IfStmt, syn.WhileStmt, syn.DoWhileStmt)):
            if syn.canonical_text(target.condition) != unit.before_text:
                raise StaleUnitError(unit.anchor, "condition no longer matches the diff")
            span = target.condition.span
            text = syn.print_expression(unit.payload)
        elif isinstance(target, syn.WhenStmt):
            if syn.canonical_text(target.subject) != unit.before_text:
                raise StaleUnitError(unit.anchor, "subject no longer matches the diff")
            span = target.subject.span
            text = syn.print_expression(unit.payload)
        elif isinstance(target, syn.ForStmt):
            var_name, iterable = unit.payload
            span = syn.Span(target.var_span.start_line, target.var_span.start_col,
                            target.iterable.span.end_line, target.iterable.span.end_col)
            text = f"{var_name} in {syn.print_expression(iterable)}"
        else:
            raise StaleUnitError(unit.anchor, f"no header on {type(target).__name__}")
        return "\n".join(_splice(lines, span, text))

    if unit.before_path is not None and unit.after_path is None:
        # deletion: splice out the span, then drop lines left blank
        _, target = _resolve_stmt(body, unit.before_path, unit.anchor)
        _check_before_text(unit, target)
        new_lines = _splice(lines, target.span, "")
        removed = range(target.span.start_line - 1, target.span.start_line)
        cleaned = [ln for i, ln in enumerate(new_lines)
                   if not (i in removed and not ln.strip())]
        return "\n".join(cleaned)

    if unit.before_path is not None:
        _, target = _resolve_stmt(body, unit.before_path, unit.anchor)
        _check_before_text(unit, target)
        indent = target.span.start_col - 1
        fragment = _indent_fragment(syn.canonical_text(unit.payload), indent)
        return "\n".join(_splice(lines, target.span, fragment))

    # insertion
    prefix, gap = unit.insert_path[:-1], unit.insert_path[-1]
    block = _walk_block(body, prefix, unit.anchor)
    if gap > len(block.statements):
        raise StaleUnitError(unit.anchor, f"gap {gap} out of range")
    if gap < len(block.statements):
        anchor_stmt = block.statements[gap]
        at_line = anchor_stmt.span.start_line
        indent = anchor_stmt.span.start_col - 1
    elif block.statements:
        last = block.statements[-1]
        at_line = last.span.end_line + 1
        indent = last.span.start_col - 1
    elif block.span is not None and unit.function != SCRIPT_KEY:
        at_line = block.span.end_line
        indent = _line_indent(lines, block.span.end_line) + 4
    else:
        # empty script region: append at end of file
        text = syn.canonical_text(unit.payload)
        if source.strip():
            return source.rstrip("\n") + "\n" + text + "\n"
        return text + "\n"
    pad = " " * indent
    fragment = [pad + ln if ln else ln
                for ln in syn.canonical_text(unit.payload).split("\n")]
    return "\n".join(lines[:at_line - 1] + fragment + lines[at_line - 1:])
