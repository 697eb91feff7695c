"""Lexer, parser, and printer for the Kotlin-like teaching subset.

The subset covers top-level functions, val/var declarations, assignments,
if/else, when with constant branches, for over ranges, while, do-while,
calls (including member calls), and the usual arithmetic, comparison, and
boolean operators plus ranges. Comments survive parsing as trivia attached
to the nearest following node. Printing is deterministic (4-space indent,
one statement per line) and `parse(print(m))` is structurally equal to `m`.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterator, Optional


class SubsetSyntaxError(ValueError):
    """Syntax error with 1-based position and an expected-token message."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Tokens


KEYWORDS = {
    "fun", "val", "var", "if", "else", "when", "for", "while", "do",
    "return", "true", "false", "in",
}

_TWO_CHAR_OPS = ("&&", "||", "==", "!=", "<=", ">=", "..", "->", "+=", "-=", "*=", "/=", "%=")
_ONE_CHAR_OPS = "(){}:,=<>+-*/%!."

ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%="}


@dataclass
class Token:
    kind: str  # keyword text, "ident", "int", "string", an operator, or "eof"
    text: str
    line: int
    col: int
    end_line: int
    end_col: int  # column of the last character, 1-based inclusive
    value: object = None  # decoded value for int/string literals


@dataclass
class Comment:
    """A comment token, stored verbatim including its delimiters."""

    text: str
    line: int
    col: int
    end_line: int
    end_col: int


def _decode_escapes(raw: str, line: int, col: int) -> str:
    out = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == "\\":
            if i + 1 >= len(raw):
                raise SubsetSyntaxError("dangling escape in string literal", line, col)
            nxt = raw[i + 1]
            mapped = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}.get(nxt)
            if mapped is None:
                raise SubsetSyntaxError(f"unsupported escape '\\{nxt}'", line, col)
            out.append(mapped)
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(source: str) -> tuple[list[Token], list[Comment]]:
    """Split source into tokens and a separate, position-ordered comment list."""
    tokens: list[Token] = []
    comments: list[Comment] = []
    line, col = 1, 1
    i = 0
    n = len(source)

    def advance(text: str) -> tuple[int, int]:
        nonlocal line, col
        for ch in text:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        return line, col

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            advance(ch)
            i += 1
            continue
        if source.startswith("//", i):
            end = source.find("\n", i)
            end = n if end == -1 else end
            text = source[i:end]
            comments.append(Comment(text, line, col, line, col + len(text) - 1))
            advance(text)
            i = end
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end == -1:
                raise SubsetSyntaxError("unterminated block comment", line, col)
            text = source[i:end + 2]
            start_line, start_col = line, col
            advance(text)
            comments.append(Comment(text, start_line, start_col, line, col - 1))
            i = end + 2
            continue
        if ch == '"':
            j = i + 1
            while j < n:
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == '"':
                    break
                if source[j] == "\n":
                    raise SubsetSyntaxError("unterminated string literal", line, col)
                j += 1
            if j >= n:
                raise SubsetSyntaxError("unterminated string literal", line, col)
            raw = source[i + 1:j]
            text = source[i:j + 1]
            value = _decode_escapes(raw, line, col)
            tokens.append(Token("string", text, line, col, line, col + len(text) - 1, value))
            advance(text)
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            text = source[i:j]
            tokens.append(Token("int", text, line, col, line, col + len(text) - 1, int(text)))
            advance(text)
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = text if text in KEYWORDS else "ident"
            tokens.append(Token(kind, text, line, col, line, col + len(text) - 1))
            advance(text)
            i = j
            continue
        if ch == ";":
            tokens.append(Token(";", ";", line, col, line, col))
            advance(ch)
            i += 1
            continue
        two = source[i:i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token(two, two, line, col, line, col + 1))
            advance(two)
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token(ch, ch, line, col, line, col))
            advance(ch)
            i += 1
            continue
        raise SubsetSyntaxError(f"unexpected character {ch!r}", line, col)

    tokens.append(Token("eof", "", line, col, line, col))
    return tokens, comments


# ---------------------------------------------------------------------------
# AST


@dataclass
class Span:
    start_line: int
    start_col: int
    end_line: int
    end_col: int  # inclusive

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.start_line, self.start_col, self.end_line, self.end_col)


@dataclass
class Node:
    span: Optional[Span] = field(default=None, repr=False, compare=False)
    leading: list[Comment] = field(default_factory=list, repr=False, compare=False)
    trailing: Optional[Comment] = field(default=None, repr=False, compare=False)


# Expressions


@dataclass
class Expr(Node):
    pass


@dataclass
class IntLit(Expr):
    value: int = 0


@dataclass
class BoolLit(Expr):
    value: bool = False


@dataclass
class StringLit(Expr):
    value: str = ""


@dataclass
class NameRef(Expr):
    name: str = ""


@dataclass
class Call(Expr):
    receiver: Optional[Expr] = None
    name: str = ""
    args: list[Expr] = field(default_factory=list)


@dataclass
class MemberAccess(Expr):
    receiver: Optional[Expr] = None
    name: str = ""


@dataclass
class Unary(Expr):
    op: str = ""
    operand: Optional[Expr] = None


@dataclass
class Binary(Expr):
    op: str = ""
    left: Optional[Expr] = None
    right: Optional[Expr] = None


@dataclass
class RangeExpr(Expr):
    low: Optional[Expr] = None
    high: Optional[Expr] = None


# Statements


@dataclass
class Stmt(Node):
    construct = "Statement"


@dataclass
class Block(Node):
    statements: list[Stmt] = field(default_factory=list)
    tail_comments: list[Comment] = field(default_factory=list, repr=False, compare=False)


@dataclass
class VarDecl(Stmt):
    mutable: bool = False
    name: str = ""
    type_name: Optional[str] = None
    value: Optional[Expr] = None


@dataclass
class Assign(Stmt):
    target: str = ""
    op: str = "="
    value: Optional[Expr] = None


@dataclass
class ExprStmt(Stmt):
    expr: Optional[Expr] = None


@dataclass
class ReturnStmt(Stmt):
    value: Optional[Expr] = None


@dataclass
class IfStmt(Stmt):
    construct = "If"
    condition: Optional[Expr] = None
    then_block: Optional[Block] = None
    else_block: Optional[Block] = None


@dataclass
class WhenBranch(Node):
    condition: Optional[Expr] = None  # None means `else`
    body: Optional[Block] = None


@dataclass
class WhenStmt(Stmt):
    construct = "When"
    subject: Optional[Expr] = None
    branches: list[WhenBranch] = field(default_factory=list)


@dataclass
class ForStmt(Stmt):
    construct = "For"
    var_name: str = ""
    iterable: Optional[Expr] = None
    body: Optional[Block] = None
    var_span: Optional[Span] = field(default=None, repr=False, compare=False)


@dataclass
class WhileStmt(Stmt):
    construct = "While"
    condition: Optional[Expr] = None
    body: Optional[Block] = None


@dataclass
class DoWhileStmt(Stmt):
    construct = "DoWhile"
    body: Optional[Block] = None
    condition: Optional[Expr] = None


@dataclass
class FunctionDecl(Node):
    construct = "FunctionDecl"
    name: str = ""
    parameters: list[tuple[str, str]] = field(default_factory=list)
    return_type: Optional[str] = None
    body: Optional[Block] = None

    @property
    def arity(self) -> int:
        return len(self.parameters)

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, self.arity)

    def signature(self) -> str:
        params = ", ".join(f"{n}: {t}" for n, t in self.parameters)
        sig = f"{self.name}({params})"
        if self.return_type is not None:
            sig += f": {self.return_type}"
        return sig

    def body_line_count(self) -> int:
        """Non-blank canonical lines strictly between the body's braces."""
        text = print_block_body(self.body)
        return sum(1 for ln in text.splitlines() if ln.strip())


COMPOUND_STATEMENTS = (IfStmt, WhenStmt, ForStmt, WhileStmt, DoWhileStmt)


@dataclass
class SourceModule(Node):
    functions: list[FunctionDecl] = field(default_factory=list)
    top_level_statements: list[Stmt] = field(default_factory=list)
    tail_comments: list[Comment] = field(default_factory=list, repr=False, compare=False)

    def function(self, name: str, arity: int) -> Optional[FunctionDecl]:
        for fn in self.functions:
            if fn.name == name and fn.arity == arity:
                return fn
        return None

    def all_comments(self) -> list[Comment]:
        """Every comment in the module, in source order."""
        found: list[Comment] = []

        def visit(node):
            if isinstance(node, Node):
                found.extend(node.leading)
                if node.trailing is not None:
                    found.append(node.trailing)
            if isinstance(node, Block):
                for s in node.statements:
                    visit(s)
                found.extend(node.tail_comments)
            elif isinstance(node, FunctionDecl):
                visit(node.body)
            elif isinstance(node, IfStmt):
                visit(node.then_block)
                if node.else_block is not None:
                    visit(node.else_block)
            elif isinstance(node, WhenStmt):
                for br in node.branches:
                    visit(br)
                    visit(br.body)
            elif isinstance(node, (ForStmt, WhileStmt, DoWhileStmt)):
                visit(node.body)

        for fn in self.functions:
            visit(fn)
        for st in self.top_level_statements:
            visit(st)
        found.extend(self.tail_comments)
        return sorted(found, key=lambda c: (c.line, c.col))


def child_blocks(stmt: Stmt) -> list[Block]:
    """Ordered child blocks of a compound statement (then/else, branches, body)."""
    if isinstance(stmt, IfStmt):
        blocks = [stmt.then_block]
        if stmt.else_block is not None:
            blocks.append(stmt.else_block)
        return blocks
    if isinstance(stmt, WhenStmt):
        return [br.body for br in stmt.branches]
    if isinstance(stmt, (ForStmt, WhileStmt, DoWhileStmt)):
        return [stmt.body]
    return []


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, source: str):
        self.tokens, self._comments = tokenize(source)
        self.pos = 0
        self._cpos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        idx = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[idx]

    def advance(self) -> Token:
        tok = self.cur
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> Token:
        if self.cur.kind != kind:
            want = what or f"'{kind}'"
            raise SubsetSyntaxError(
                f"expected {want}, found {self.cur.text!r}", self.cur.line, self.cur.col
            )
        return self.advance()

    def skip_separators(self) -> None:
        while self.cur.kind == ";":
            self.advance()

    # comment attachment

    def take_leading(self, tok: Token) -> list[Comment]:
        taken = []
        while self._cpos < len(self._comments):
            c = self._comments[self._cpos]
            if (c.line, c.col) < (tok.line, tok.col):
                taken.append(c)
                self._cpos += 1
            else:
                break
        return taken

    def take_trailing(self, end_line: int, end_col: int) -> Optional[Comment]:
        if self._cpos < len(self._comments):
            c = self._comments[self._cpos]
            if c.line == end_line and c.col > end_col:
                self._cpos += 1
                return c
        return None

    def remaining_comments_before(self, tok: Token) -> list[Comment]:
        return self.take_leading(tok)

    # entry point

    def parse_module(self) -> SourceModule:
        module = SourceModule()
        self.skip_separators()
        while self.cur.kind != "eof":
            leading = self.take_leading(self.cur)
            if self.cur.kind == "fun":
                node = self.parse_function()
                node.leading = leading
                node.trailing = self.take_trailing(node.span.end_line, node.span.end_col)
                module.functions.append(node)
            else:
                node = self.parse_statement()
                node.leading = leading
                node.trailing = self.take_trailing(node.span.end_line, node.span.end_col)
                module.top_level_statements.append(node)
            self.skip_separators()
        module.tail_comments = self._comments[self._cpos:]
        self._cpos = len(self._comments)
        first = 1
        module.span = Span(first, 1, self.cur.line, max(self.cur.col, 1))
        return module

    # declarations

    def parse_function(self) -> FunctionDecl:
        start = self.expect("fun")
        name = self.expect("ident", "function name").text
        self.expect("(")
        params: list[tuple[str, str]] = []
        while self.cur.kind != ")":
            pname = self.expect("ident", "parameter name").text
            self.expect(":")
            ptype = self.expect("ident", "parameter type").text
            params.append((pname, ptype))
            if self.cur.kind == ",":
                self.advance()
            elif self.cur.kind != ")":
                raise SubsetSyntaxError(
                    f"expected ',' or ')', found {self.cur.text!r}",
                    self.cur.line, self.cur.col,
                )
        self.expect(")")
        return_type = None
        if self.cur.kind == ":":
            self.advance()
            return_type = self.expect("ident", "return type").text
        if self.cur.kind == "{":
            body = self.parse_block()
            end = body.span
        elif self.cur.kind == "=":
            self.advance()
            expr = self.parse_expression()
            ret = ReturnStmt(value=expr, span=expr.span)
            body = Block(statements=[ret], span=expr.span)
            end = expr.span
        else:
            raise SubsetSyntaxError(
                f"expected '{{' or '=', found {self.cur.text!r}", self.cur.line, self.cur.col
            )
        fn = FunctionDecl(name=name, parameters=params, return_type=return_type, body=body)
        fn.span = Span(start.line, start.col, end.end_line, end.end_col)
        return fn

    def parse_block(self) -> Block:
        open_tok = self.expect("{")
        block = Block()
        self.skip_separators()
        while self.cur.kind != "}":
            if self.cur.kind == "eof":
                raise SubsetSyntaxError("expected '}', found end of input",
                                        self.cur.line, self.cur.col)
            leading = self.take_leading(self.cur)
            stmt = self.parse_statement()
            stmt.leading = leading
            stmt.trailing = self.take_trailing(stmt.span.end_line, stmt.span.end_col)
            block.statements.append(stmt)
            self.skip_separators()
        block.tail_comments = self.take_leading(self.cur)
        close_tok = self.expect("}")
        block.span = Span(open_tok.line, open_tok.col, close_tok.line, close_tok.col)
        return block

    def parse_body(self) -> Block:
        """A braced block, or a single statement wrapped into a block."""
        if self.cur.kind == "{":
            return self.parse_block()
        stmt = self.parse_statement()
        return Block(statements=[stmt], span=stmt.span)

    # statements

    def parse_statement(self) -> Stmt:
        kind = self.cur.kind
        if kind == "fun":
            raise SubsetSyntaxError("functions are only allowed at the top level",
                                    self.cur.line, self.cur.col)
        if kind in ("val", "var"):
            return self.parse_var_decl()
        if kind == "if":
            return self.parse_if()
        if kind == "when":
            return self.parse_when()
        if kind == "for":
            return self.parse_for()
        if kind == "while":
            return self.parse_while()
        if kind == "do":
            return self.parse_do_while()
        if kind == "return":
            return self.parse_return()
        expr = self.parse_expression()
        if isinstance(expr, NameRef) and self.cur.kind in ASSIGN_OPS:
            op = self.advance().kind
            value = self.parse_expression()
            stmt = Assign(target=expr.name, op=op, value=value)
            stmt.span = Span(expr.span.start_line, expr.span.start_col,
                             value.span.end_line, value.span.end_col)
            return stmt
        if self.cur.kind in ASSIGN_OPS:
            raise SubsetSyntaxError("assignment target must be a simple name",
                                    self.cur.line, self.cur.col)
        stmt = ExprStmt(expr=expr)
        stmt.span = expr.span
        return stmt

    def parse_var_decl(self) -> VarDecl:
        start = self.advance()
        mutable = start.kind == "var"
        name = self.expect("ident", "variable name").text
        type_name = None
        if self.cur.kind == ":":
            self.advance()
            type_name = self.expect("ident", "type name").text
        self.expect("=")
        value = self.parse_expression()
        stmt = VarDecl(mutable=mutable, name=name, type_name=type_name, value=value)
        stmt.span = Span(start.line, start.col, value.span.end_line, value.span.end_col)
        return stmt

    def parse_if(self) -> IfStmt:
        start = self.expect("if")
        self.expect("(")
        cond = self.parse_expression()
        self.expect(")")
        then_block = self.parse_body()
        else_block = None
        end = then_block.span
        if self.cur.kind == "else":
            self.advance()
            if self.cur.kind == "if":
                nested = self.parse_if()
                else_block = Block(statements=[nested], span=nested.span)
            else:
                else_block = self.parse_body()
            end = else_block.span
        stmt = IfStmt(condition=cond, then_block=then_block, else_block=else_block)
        stmt.span = Span(start.line, start.col, end.end_line, end.end_col)
        return stmt

    def parse_when(self) -> WhenStmt:
        start = self.expect("when")
        self.expect("(")
        subject = self.parse_expression()
        self.expect(")")
        self.expect("{")
        branches: list[WhenBranch] = []
        self.skip_separators()
        while self.cur.kind != "}":
            if self.cur.kind == "eof":
                raise SubsetSyntaxError("expected '}', found end of input",
                                        self.cur.line, self.cur.col)
            leading = self.take_leading(self.cur)
            btok = self.cur
            if self.cur.kind == "else":
                self.advance()
                condition = None
            else:
                condition = self.parse_expression()
            self.expect("->")
            body = self.parse_body()
            branch = WhenBranch(condition=condition, body=body)
            branch.span = Span(btok.line, btok.col, body.span.end_line, body.span.end_col)
            branch.leading = leading
            branch.trailing = self.take_trailing(branch.span.end_line, branch.span.end_col)
            branches.append(branch)
            self.skip_separators()
        close = self.expect("}")
        stmt = WhenStmt(subject=subject, branches=branches)
        stmt.span = Span(start.line, start.col, close.line, close.col)
        return stmt

    def parse_for(self) -> ForStmt:
        start = self.expect("for")
        self.expect("(")
        var_tok = self.expect("ident", "loop variable")
        self.expect("in")
        iterable = self.parse_expression()
        self.expect(")")
        body = self.parse_body()
        stmt = ForStmt(var_name=var_tok.text, iterable=iterable, body=body)
        stmt.var_span = Span(var_tok.line, var_tok.col, var_tok.end_line, var_tok.end_col)
        stmt.span = Span(start.line, start.col, body.span.end_line, body.span.end_col)
        return stmt

    def parse_while(self) -> WhileStmt:
        start = self.expect("while")
        self.expect("(")
        cond = self.parse_expression()
        self.expect(")")
        body = self.parse_body()
        stmt = WhileStmt(condition=cond, body=body)
        stmt.span = Span(start.line, start.col, body.span.end_line, body.span.end_col)
        return stmt

    def parse_do_while(self) -> DoWhileStmt:
        start = self.expect("do")
        body = self.parse_block()
        self.expect("while")
        self.expect("(")
        cond = self.parse_expression()
        close = self.expect(")")
        stmt = DoWhileStmt(body=body, condition=cond)
        stmt.span = Span(start.line, start.col, close.line, close.col)
        return stmt

    def parse_return(self) -> ReturnStmt:
        start = self.expect("return")
        value = None
        end_line, end_col = start.line, start.end_col
        if self.cur.kind not in ("}", ";", "eof") and self.cur.line == start.line:
            value = self.parse_expression()
            end_line, end_col = value.span.end_line, value.span.end_col
        stmt = ReturnStmt(value=value)
        stmt.span = Span(start.line, start.col, end_line, end_col)
        return stmt

    # expressions (precedence climbing; a binary operator must start on the
    # same line as its left operand to keep statement boundaries unambiguous)

    def parse_expression(self) -> Expr:
        return self.parse_or()

    def _binary_loop(self, ops: tuple[str, ...], next_level) -> Expr:
        left = next_level()
        while self.cur.kind in ops and self.cur.line == left.span.end_line:
            op = self.advance().kind
            right = next_level()
            node = Binary(op=op, left=left, right=right)
            node.span = Span(left.span.start_line, left.span.start_col,
                             right.span.end_line, right.span.end_col)
            left = node
        return left

    def parse_or(self) -> Expr:
        return self._binary_loop(("||",), self.parse_and)

    def parse_and(self) -> Expr:
        return self._binary_loop(("&&",), self.parse_equality)

    def parse_equality(self) -> Expr:
        return self._binary_loop(("==", "!="), self.parse_comparison)

    def parse_comparison(self) -> Expr:
        return self._binary_loop(("<", "<=", ">", ">=", "in"), self.parse_range)

    def parse_range(self) -> Expr:
        left = self.parse_additive()
        if self.cur.kind == ".." and self.cur.line == left.span.end_line:
            self.advance()
            right = self.parse_additive()
            node = RangeExpr(low=left, high=right)
            node.span = Span(left.span.start_line, left.span.start_col,
                             right.span.end_line, right.span.end_col)
            return node
        return left

    def parse_additive(self) -> Expr:
        return self._binary_loop(("+", "-"), self.parse_multiplicative)

    def parse_multiplicative(self) -> Expr:
        return self._binary_loop(("*", "/", "%"), self.parse_unary)

    def parse_unary(self) -> Expr:
        if self.cur.kind in ("!", "-"):
            op_tok = self.advance()
            operand = self.parse_unary()
            node = Unary(op=op_tok.kind, operand=operand)
            node.span = Span(op_tok.line, op_tok.col,
                             operand.span.end_line, operand.span.end_col)
            return node
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while self.cur.kind == "." and self.cur.line == expr.span.end_line:
            self.advance()
            name_tok = self.expect("ident", "member name")
            if self.cur.kind == "(":
                args, close = self.parse_args()
                node = Call(receiver=expr, name=name_tok.text, args=args)
                node.span = Span(expr.span.start_line, expr.span.start_col,
                                 close.line, close.col)
            else:
                node = MemberAccess(receiver=expr, name=name_tok.text)
                node.span = Span(expr.span.start_line, expr.span.start_col,
                                 name_tok.end_line, name_tok.end_col)
            expr = node
        return expr

    def parse_args(self) -> tuple[list[Expr], Token]:
        self.expect("(")
        args: list[Expr] = []
        while self.cur.kind != ")":
            args.append(self.parse_expression())
            if self.cur.kind == ",":
                self.advance()
            elif self.cur.kind != ")":
                raise SubsetSyntaxError(
                    f"expected ',' or ')', found {self.cur.text!r}",
                    self.cur.line, self.cur.col,
                )
        close = self.expect(")")
        return args, close

    def parse_primary(self) -> Expr:
        tok = self.cur
        if tok.kind == "int":
            self.advance()
            node = IntLit(value=tok.value)
        elif tok.kind == "string":
            self.advance()
            node = StringLit(value=tok.value)
        elif tok.kind in ("true", "false"):
            self.advance()
            node = BoolLit(value=tok.kind == "true")
        elif tok.kind == "ident":
            self.advance()
            if self.cur.kind == "(" and self.cur.line == tok.end_line:
                args, close = self.parse_args()
                node = Call(receiver=None, name=tok.text, args=args)
                node.span = Span(tok.line, tok.col, close.line, close.col)
                return node
            node = NameRef(name=tok.text)
        elif tok.kind == "(":
            self.advance()
            inner = self.parse_expression()
            close = self.expect(")")
            inner.span = Span(tok.line, tok.col, close.line, close.col)
            return inner
        else:
            raise SubsetSyntaxError(
                f"expected an expression, found {tok.text!r}", tok.line, tok.col
            )
        node.span = Span(tok.line, tok.col, tok.end_line, tok.end_col)
        return node


def parse(source: str) -> SourceModule:
    """Parse subset source text into a module with spans and comment trivia."""
    return _Parser(source).parse_module()


def parse_expression(source: str) -> Expr:
    """Parse a single expression (helper for rule matching and tests)."""
    parser = _Parser(source)
    expr = parser.parse_expression()
    if parser.cur.kind != "eof":
        raise SubsetSyntaxError(
            f"unexpected trailing input {parser.cur.text!r}",
            parser.cur.line, parser.cur.col,
        )
    return expr


def parse_statement(source: str) -> Stmt:
    """Parse a single statement (helper for fixtures and unit application)."""
    parser = _Parser(source)
    leading = parser.take_leading(parser.cur)
    stmt = parser.parse_statement()
    stmt.leading = leading
    stmt.trailing = parser.take_trailing(stmt.span.end_line, stmt.span.end_col)
    parser.skip_separators()
    if parser.cur.kind != "eof":
        raise SubsetSyntaxError(
            f"unexpected trailing input {parser.cur.text!r}",
            parser.cur.line, parser.cur.col,
        )
    return stmt


# ---------------------------------------------------------------------------
# Printer

_PREC = {
    "||": 1, "&&": 2, "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4, "in": 4,
    "+": 6, "-": 6, "*": 7, "/": 7, "%": 7,
}
_RANGE_PREC = 5
_UNARY_PREC = 8

_ESCAPES = {"\n": "\\n", "\t": "\\t", "\r": "\\r", '"': '\\"', "\\": "\\\\"}


def _escape_string(value: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in value)


def print_expression(expr: Expr, parent_prec: int = 0) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, StringLit):
        return f'"{_escape_string(expr.value)}"'
    if isinstance(expr, NameRef):
        return expr.name
    if isinstance(expr, Call):
        args = ", ".join(print_expression(a) for a in expr.args)
        if expr.receiver is not None:
            return f"{print_expression(expr.receiver, _UNARY_PREC + 1)}.{expr.name}({args})"
        return f"{expr.name}({args})"
    if isinstance(expr, MemberAccess):
        return f"{print_expression(expr.receiver, _UNARY_PREC + 1)}.{expr.name}"
    if isinstance(expr, Unary):
        text = f"{expr.op}{print_expression(expr.operand, _UNARY_PREC)}"
        return f"({text})" if parent_prec > _UNARY_PREC else text
    if isinstance(expr, RangeExpr):
        low = print_expression(expr.low, _RANGE_PREC + 1)
        high = print_expression(expr.high, _RANGE_PREC + 1)
        text = f"{low}..{high}"
        return f"({text})" if parent_prec > _RANGE_PREC else text
    if isinstance(expr, Binary):
        prec = _PREC[expr.op]
        left = print_expression(expr.left, prec)
        right = print_expression(expr.right, prec + 1)
        text = f"{left} {expr.op} {right}"
        return f"({text})" if parent_prec > prec else text
    raise TypeError(f"cannot print expression {expr!r}")


class _Printer:
    def __init__(self, include_comments: bool = True):
        self.include_comments = include_comments
        self.lines: list[str] = []

    def emit(self, indent: int, text: str) -> None:
        self.lines.append("    " * indent + text if text else "")

    def emit_leading(self, node: Node, indent: int) -> None:
        if self.include_comments:
            for c in node.leading:
                for ln in c.text.splitlines():
                    self.emit(indent, ln)

    def attach_trailing(self, node: Node) -> None:
        if self.include_comments and node.trailing is not None and self.lines:
            self.lines[-1] = f"{self.lines[-1]} {node.trailing.text}"

    def emit_tail(self, comments: list[Comment], indent: int) -> None:
        if self.include_comments:
            for c in comments:
                for ln in c.text.splitlines():
                    self.emit(indent, ln)

    def module(self, mod: SourceModule) -> str:
        for i, fn in enumerate(mod.functions):
            if i > 0:
                self.emit(0, "")
            self.function(fn, 0)
        if mod.functions and mod.top_level_statements:
            self.emit(0, "")
        for st in mod.top_level_statements:
            self.statement(st, 0)
        self.emit_tail(mod.tail_comments, 0)
        return "\n".join(self.lines) + ("\n" if self.lines else "")

    def function(self, fn: FunctionDecl, indent: int) -> None:
        self.emit_leading(fn, indent)
        self.emit(indent, f"fun {fn.signature()} {{")
        self.block_body(fn.body, indent + 1)
        self.emit(indent, "}")
        self.attach_trailing(fn)

    def block_body(self, block: Block, indent: int) -> None:
        for st in block.statements:
            self.statement(st, indent)
        self.emit_tail(block.tail_comments, indent)

    def statement(self, st: Stmt, indent: int) -> None:
        self.emit_leading(st, indent)
        if isinstance(st, VarDecl):
            kw = "var" if st.mutable else "val"
            typed = f": {st.type_name}" if st.type_name else ""
            self.emit(indent, f"{kw} {st.name}{typed} = {print_expression(st.value)}")
        elif isinstance(st, Assign):
            self.emit(indent, f"{st.target} {st.op} {print_expression(st.value)}")
        elif isinstance(st, ExprStmt):
            self.emit(indent, print_expression(st.expr))
        elif isinstance(st, ReturnStmt):
            if st.value is None:
                self.emit(indent, "return")
            else:
                self.emit(indent, f"return {print_expression(st.value)}")
        elif isinstance(st, IfStmt):
            self.if_statement(st, indent)
        elif isinstance(st, WhenStmt):
            self.emit(indent, f"when ({print_expression(st.subject)}) {{")
            for br in st.branches:
                self.when_branch(br, indent + 1)
            self.emit(indent, "}")
        elif isinstance(st, ForStmt):
            self.emit(indent, f"for ({st.var_name} in {print_expression(st.iterable)}) {{")
            self.block_body(st.body, indent + 1)
            self.emit(indent, "}")
        elif isinstance(st, WhileStmt):
            self.emit(indent, f"while ({print_expression(st.condition)}) {{")
            self.block_body(st.body, indent + 1)
            self.emit(indent, "}")
        elif isinstance(st, DoWhileStmt):
            self.emit(indent, "do {")
            self.block_body(st.body, indent + 1)
            self.emit(indent, f"}} while ({print_expression(st.condition)})")
        else:
            raise TypeError(f"cannot print statement {st!r}")
        self.attach_trailing(st)

    def if_statement(self, st: IfStmt, indent: int) -> None:
        self.emit(indent, f"if ({print_expression(st.condition)}) {{")
        self.block_body(st.then_block, indent + 1)
        node = st
        while True:
            els = node.else_block
            if els is None:
                self.emit(indent, "}")
                return
            inner = els.statements
            chains = (
                len(inner) == 1
                and isinstance(inner[0], IfStmt)
                and not inner[0].leading
                and inner[0].trailing is None
                and not els.tail_comments
            )
            if chains:
                nested = inner[0]
                self.emit(indent, f"}} else if ({print_expression(nested.condition)}) {{")
                self.block_body(nested.then_block, indent + 1)
                node = nested
            else:
                self.emit(indent, "} else {")
                self.block_body(els, indent + 1)
                self.emit(indent, "}")
                return

    def when_branch(self, br: WhenBranch, indent: int) -> None:
        self.emit_leading(br, indent)
        cond = "else" if br.condition is None else print_expression(br.condition)
        stmts = br.body.statements
        inline = (
            len(stmts) == 1
            and not isinstance(stmts[0], COMPOUND_STATEMENTS)
            and not stmts[0].leading
            and stmts[0].trailing is None
            and not br.body.tail_comments
        )
        if inline:
            sub = _Printer(self.include_comments)
            sub.statement(stmts[0], 0)
            self.emit(indent, f"{cond} -> {sub.lines[0]}")
        else:
            self.emit(indent, f"{cond} -> {{")
            self.block_body(br.body, indent + 1)
            self.emit(indent, "}")
        self.attach_trailing(br)


def print_module(module: SourceModule, include_comments: bool = True) -> str:
    """Deterministic canonical rendering: 4-space indent, one statement per line."""
    return _Printer(include_comments).module(module)


def print_statement(stmt: Stmt, include_comments: bool = False) -> str:
    printer = _Printer(include_comments)
    printer.statement(stmt, 0)
    return "\n".join(printer.lines)


def print_function(fn: FunctionDecl, include_comments: bool = False) -> str:
    printer = _Printer(include_comments)
    printer.function(fn, 0)
    return "\n".join(printer.lines)


def print_block_body(block: Block) -> str:
    """The statements of a block, unindented, comments dropped."""
    printer = _Printer(include_comments=False)
    printer.block_body(block, 0)
    return "\n".join(printer.lines)


def canonical_text(node) -> str:
    """Comment-free canonical form; equal text means structurally equal."""
    if isinstance(node, SourceModule):
        return print_module(node, include_comments=False)
    if isinstance(node, FunctionDecl):
        return print_function(node, include_comments=False)
    if isinstance(node, Stmt):
        return print_statement(node, include_comments=False)
    if isinstance(node, Expr):
        return print_expression(node)
    if isinstance(node, Block):
        return print_block_body(node)
    raise TypeError(f"no canonical form for {node!r}")


def structurally_equal(a, b) -> bool:
    return canonical_text(a) == canonical_text(b)


# ---------------------------------------------------------------------------
# Module-level helpers


def extract_signatures(module: SourceModule) -> list[str]:
    """Function signatures as `name(p: T): R` strings, declaration order."""
    return [fn.signature() for fn in module.functions]


def extract_string_literals(module: SourceModule) -> list[str]:
    """Distinct decoded string literals in first-occurrence order."""
    seen: list[str] = []

    def walk_expr(expr: Optional[Expr]) -> None:
        if expr is None:
            return
        if isinstance(expr, StringLit):
            if expr.value not in seen:
                seen.append(expr.value)
        elif isinstance(expr, Call):
            walk_expr(expr.receiver)
            for a in expr.args:
                walk_expr(a)
        elif isinstance(expr, MemberAccess):
            walk_expr(expr.receiver)
        elif isinstance(expr, Unary):
            walk_expr(expr.operand)
        elif isinstance(expr, Binary):
            walk_expr(expr.left)
            walk_expr(expr.right)
        elif isinstance(expr, RangeExpr):
            walk_expr(expr.low)
            walk_expr(expr.high)

    def walk_stmt(st: Stmt) -> None:
        if isinstance(st, VarDecl):
            walk_expr(st.value)
        elif isinstance(st, Assign):
            walk_expr(st.value)
        elif isinstance(st, ExprStmt):
            walk_expr(st.expr)
        elif isinstance(st, ReturnStmt):
            walk_expr(st.value)
        elif isinstance(st, IfStmt):
            walk_expr(st.condition)
            walk_block(st.then_block)
            if st.else_block is not None:
                walk_block(st.else_block)
        elif isinstance(st, WhenStmt):
            walk_expr(st.subject)
            for br in st.branches:
                walk_expr(br.condition)
                walk_block(br.body)
        elif isinstance(st, ForStmt):
            walk_expr(st.iterable)
            walk_block(st.body)
        elif isinstance(st, WhileStmt):
            walk_expr(st.condition)
            walk_block(st.body)
        elif isinstance(st, DoWhileStmt):
            walk_block(st.body)
            walk_expr(st.condition)

    def walk_block(block: Block) -> None:
        for st in block.statements:
            walk_stmt(st)

    for fn in module.functions:
        walk_block(fn.body)
    for st in module.top_level_statements:
        walk_stmt(st)
    return seen


def strip_comments(module: SourceModule) -> SourceModule:
    """A copy of the module with all comment trivia removed; idempotent."""
    clone = copy.deepcopy(module)

    def scrub(node) -> None:
        if isinstance(node, Node):
            node.leading = []
            node.trailing = None
        if isinstance(node, Block):
            node.tail_comments = []
            for s in node.statements:
                scrub(s)
        elif isinstance(node, FunctionDecl):
            scrub(node.body)
        elif isinstance(node, IfStmt):
            scrub(node.then_block)
            if node.else_block is not None:
                scrub(node.else_block)
        elif isinstance(node, WhenStmt):
            for br in node.branches:
                scrub(br)
                scrub(br.body)
        elif isinstance(node, (ForStmt, WhileStmt, DoWhileStmt)):
            scrub(node.body)

    for fn in clone.functions:
        scrub(fn)
    for st in clone.top_level_statements:
        scrub(st)
    clone.tail_comments = []
    return clone


def iter_statements(block: Block) -> Iterator[Stmt]:
    """Depth-first traversal of all statements under a block."""
    for st in block.statements:
        yield st
        for child in child_blocks(st):
            yield from iter_statements(child)


def slice_span(source: str, span: Span) -> str:
    """The exact source text a span covers (end-inclusive)."""
    lines = source.splitlines()
    if span.start_line == span.end_line:
        return lines[span.start_line - 1][span.start_col - 1:span.end_col]
    parts = [lines[span.start_line - 1][span.start_col - 1:]]
    parts.extend(lines[span.start_line:span.end_line - 1])
    parts.append(lines[span.end_line - 1][:span.end_col])
    return "\n".join(parts)
